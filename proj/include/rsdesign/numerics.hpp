#pragma once

#include <Eigen/Dense>

#include "rsdesign/errors.hpp"

namespace rsdesign {

// Every matrix in the library is a small dense column-major Eigen matrix.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace numerics {

// Pivots below this fraction of the largest diagonal entry are treated as zero.
inline constexpr double kSpdRelativeTolerance = 1e-10;

/// Pivoted Cholesky factor of a symmetric positive definite matrix.
///
/// Stores the lower factor of P'AP = LL' together with the pivot order so
/// callers can take log-determinants, solve and invert without refactoring.
class Cholesky {
 public:
  explicit Cholesky(const Matrix& m);

  Eigen::Index size() const { return lower_.rows(); }
  double log_det() const;
  Matrix solve(const Matrix& rhs) const;
  Matrix inverse() const;

 private:
  Matrix lower_;
  Eigen::VectorXi perm_;  // factor row i corresponds to original row perm_[i]
};

/// Log-determinant of an SPD matrix; throws NotPositiveDefinite.
double log_det_psd(const Matrix& m);

/// Inverse of an SPD matrix through the pivoted Cholesky factor.
Matrix inverse_spd(const Matrix& m);

/// General inverse by Gauss-Jordan elimination with partial pivoting; throws Singular.
Matrix inverse(const Matrix& m);

/// Numerical rank by fully pivoted Gaussian elimination. A pivot counts when
/// its magnitude exceeds tol times the largest pivot seen.
int rank(const Matrix& m, double tol = 1e-10);

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// P(F <= x) for the F distribution with (df1, df2) degrees of freedom.
double f_cdf(double x, int df1, int df2);

struct FQuantileQuery {
  int df1 = 1;
  int df2 = 1;
  double level = 0.95;
};

/// x such that P(F <= x) = level. Throws DomainError on invalid queries,
/// including df2 == 0.
double f_quantile(const FQuantileQuery& query);

}  // namespace numerics
}  // namespace rsdesign
