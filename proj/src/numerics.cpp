#include "rsdesign/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace rsdesign::numerics {

Cholesky::Cholesky(const Matrix& m) : lower_(m), perm_(m.rows()) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw NotPositiveDefinite("Cholesky: matrix must be square and non-empty");
  }
  const Eigen::Index n = m.rows();
  for (Eigen::Index i = 0; i < n; ++i) perm_[i] = static_cast<int>(i);

  const double max_diag = m.diagonal().maxCoeff();
  if (!(max_diag > 0.0)) {
    throw NotPositiveDefinite("Cholesky: largest diagonal entry is not positive");
  }
  const double threshold = kSpdRelativeTolerance * max_diag;

  // Work on the full matrix in place; the strict upper triangle is cleared at the end.
  Matrix& a = lower_;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index best = j;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      if (a(i, i) > a(best, best)) best = i;
    }
    if (best != j) {
      a.row(j).swap(a.row(best));
      a.col(j).swap(a.col(best));
      std::swap(perm_[j], perm_[best]);
    }
    const double pivot = a(j, j);
    if (!(pivot > threshold)) {
      throw NotPositiveDefinite("Cholesky: pivot " + std::to_string(j) + " is " +
                                std::to_string(pivot) + ", below tolerance");
    }
    const double root = std::sqrt(pivot);
    a(j, j) = root;
    for (Eigen::Index i = j + 1; i < n; ++i) a(i, j) /= root;
    // Schur complement update of the whole trailing block; later symmetric
    // swaps read both triangles.
    const Eigen::Index rest = n - j - 1;
    if (rest > 0) {
      const Vector col = a.col(j).tail(rest);
      a.bottomRightCorner(rest, rest).noalias() -= col * col.transpose();
    }
  }
  lower_.triangularView<Eigen::StrictlyUpper>().setZero();
}

double Cholesky::log_det() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

Matrix Cholesky::solve(const Matrix& rhs) const {
  const Eigen::Index n = size();
  Matrix permuted(n, rhs.cols());
  for (Eigen::Index i = 0; i < n; ++i) permuted.row(i) = rhs.row(perm_[i]);
  lower_.triangularView<Eigen::Lower>().solveInPlace(permuted);
  lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(permuted);
  Matrix out(n, rhs.cols());
  for (Eigen::Index i = 0; i < n; ++i) out.row(perm_[i]) = permuted.row(i);
  return out;
}

Matrix Cholesky::inverse() const {
  Matrix inv = solve(Matrix::Identity(size(), size()));
  // Symmetrize away roundoff so downstream quadratic forms stay symmetric.
  return 0.5 * (inv + inv.transpose());
}

double log_det_psd(const Matrix& m) { return Cholesky(m).log_det(); }

Matrix inverse_spd(const Matrix& m) { return Cholesky(m).inverse(); }

Matrix inverse(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Singular("inverse: matrix must be square and non-empty");
  }
  const Eigen::Index n = m.rows();
  Matrix a = m;
  Matrix inv = Matrix::Identity(n, n);
  const double scale = m.cwiseAbs().maxCoeff();
  const double threshold = 1e-13 * static_cast<double>(n) * scale;
  if (!(scale > 0.0)) throw Singular("inverse: zero matrix");

  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot_row;
    const double pivot_abs = a.col(col).tail(n - col).cwiseAbs().maxCoeff(&pivot_row);
    pivot_row += col;
    if (!(pivot_abs > threshold)) {
      throw Singular("inverse: matrix is singular at column " + std::to_string(col));
    }
    if (pivot_row != col) {
      a.row(col).swap(a.row(pivot_row));
      inv.row(col).swap(inv.row(pivot_row));
    }
    const double pivot = a(col, col);
    a.row(col) /= pivot;
    inv.row(col) /= pivot;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a(r, col);
      if (factor == 0.0) continue;
      a.row(r) -= factor * a.row(col);
      inv.row(r) -= factor * inv.row(col);
    }
  }
  return inv;
}

int rank(const Matrix& m, double tol) {
  Matrix a = m;
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  const Eigen::Index steps = std::min(rows, cols);
  double reference = 0.0;
  int r = 0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    Eigen::Index pr, pc;
    const double pivot_abs =
        a.bottomRightCorner(rows - k, cols - k).cwiseAbs().maxCoeff(&pr, &pc);
    if (k == 0) reference = pivot_abs;
    if (!(reference > 0.0) || pivot_abs <= tol * reference) break;
    pr += k;
    pc += k;
    a.row(k).swap(a.row(pr));
    a.col(k).swap(a.col(pc));
    for (Eigen::Index i = k + 1; i < rows; ++i) {
      const double factor = a(i, k) / a(k, k);
      if (factor != 0.0) a.row(i).tail(cols - k) -= factor * a.row(k).tail(cols - k);
    }
    ++r;
  }
  return r;
}

namespace {

constexpr double kContinuedFractionEps = 1e-12;
constexpr int kContinuedFractionMaxIter = 10000;
constexpr double kTiny = 1e-300;

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kContinuedFractionMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kContinuedFractionEps) return h;
  }
  return h;
}

// I_x(a, b) with y = 1 - x supplied separately so callers can keep precision
// when x is close to one.
double incomplete_beta_pair(double a, double b, double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log(y) - log_beta(a, b);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

// x * pdf(x) of the F distribution, i.e. the derivative of the CDF in log x.
double f_log_density_jacobian(double x, int df1, int df2) {
  const double d1 = df1;
  const double d2 = df2;
  const double log_value = 0.5 * (d1 * std::log(d1 * x) + d2 * std::log(d2) -
                                  (d1 + d2) * std::log(d1 * x + d2)) -
                           log_beta(0.5 * d1, 0.5 * d2);
  return std::exp(log_value);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0) || !(x <= 1.0)) {
    throw DomainError("incomplete_beta: requires a > 0, b > 0, 0 <= x <= 1");
  }
  return incomplete_beta_pair(a, b, x, 1.0 - x);
}

double f_cdf(double x, int df1, int df2) {
  if (df1 < 1 || df2 < 1) throw DomainError("f_cdf: degrees of freedom must be >= 1");
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double num = static_cast<double>(df1) * x;
  const double den = num + static_cast<double>(df2);
  return incomplete_beta_pair(0.5 * df1, 0.5 * df2, num / den, df2 / den);
}

double f_quantile(const FQuantileQuery& query) {
  if (query.df1 < 1 || query.df2 < 1) {
    throw DomainError("f_quantile: degrees of freedom must be >= 1 (got df1=" +
                      std::to_string(query.df1) + ", df2=" + std::to_string(query.df2) + ")");
  }
  if (!(query.level > 0.0) || !(query.level < 1.0)) {
    throw DomainError("f_quantile: level must lie in (0, 1)");
  }
  const double p = query.level;
  auto residual = [&](double u) { return f_cdf(std::exp(u), query.df1, query.df2) - p; };

  // Bracket the root in u = log x.
  double lo = -1.0;
  double hi = 1.0;
  while (residual(lo) > 0.0) {
    hi = lo;
    lo *= 2.0;
    if (lo < -1400.0) return std::exp(lo);
  }
  while (residual(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1400.0) return std::exp(hi);
  }

  // Newton in log x, falling back to bisection whenever a step leaves the bracket.
  double u = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double r = residual(u);
    if (r == 0.0) break;
    if (r < 0.0) {
      lo = u;
    } else {
      hi = u;
    }
    const double slope = f_log_density_jacobian(std::exp(u), query.df1, query.df2);
    double next = u - r / slope;
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    const double step = std::fabs(next - u);
    u = next;
    if (step < 1e-14 * std::max(1.0, std::fabs(u)) || hi - lo < 1e-15) break;
  }
  return std::exp(u);
}

}  // namespace rsdesign::numerics
