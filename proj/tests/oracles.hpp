#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerics: determinants and inverses go through Eigen's
// LU, F quantiles through Boost.Math's CDF and plain bisection.

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rsdesign/criteria.hpp"

namespace oracle {

using rsdesign::Matrix;

inline std::string fixture(const std::string& name) { return std::string(RSDESIGN_SOURCE_DIR) + "/fixtures/" + name; }

/// Bisection on the Boost CDF; 200 halvings of a bracket found by doubling.
inline double f_quantile(int df1, int df2, double level) {
  const boost::math::fisher_f_distribution<double> dist(df1, df2);
  double lo = 0.0;
  double hi = 1.0;
  while (boost::math::cdf(dist, hi) < level) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (boost::math::cdf(dist, mid) < level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// log|M| through a full-pivot LU of a row- and column-reversed copy.
inline double log_det(const Matrix& m) {
  const Matrix flipped = m.colwise().reverse().rowwise().reverse();
  const Eigen::FullPivLU<Matrix> lu(flipped);
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) s += std::log(std::fabs(lu.matrixLU()(i, i)));
  return s;
}

inline Matrix inverse(const Matrix& m) { return Eigen::FullPivLU<Matrix>(m).inverse(); }

/// Block indicator matrix Z (n x b).
inline Matrix indicator(const std::vector<int>& blocks, int b) {
  Matrix z = Matrix::Zero(static_cast<Eigen::Index>(blocks.size()), b);
  for (std::size_t i = 0; i < blocks.size(); ++i) z(static_cast<Eigen::Index>(i), blocks[i] - 1) = 1.0;
  return z;
}

/// Treatment indicator matrix T (n x t), one column per distinct run.
inline Matrix treatments(const Matrix& runs) {
  std::map<std::vector<double>, int> ids;
  std::vector<int> id(static_cast<std::size_t>(runs.rows()));
  for (Eigen::Index i = 0; i < runs.rows(); ++i) {
    std::vector<double> key;
    for (Eigen::Index f = 0; f < runs.cols(); ++f) key.push_back(runs(i, f));
    id[static_cast<std::size_t>(i)] = ids.emplace(key, static_cast<int>(ids.size())).first->second;
  }
  Matrix t = Matrix::Zero(runs.rows(), static_cast<Eigen::Index>(ids.size()));
  for (Eigen::Index i = 0; i < runs.rows(); ++i) t(i, id[static_cast<std::size_t>(i)]) = 1.0;
  return t;
}

struct Dof {
  int t = 0;
  int d = 0;
  int lof = 0;
};

/// Pure error from the numerical rank of [Z:T] (or of T when unblocked).
inline Dof dof(const Matrix& runs, const std::vector<int>& blocks, int b, int p) {
  const Matrix t = treatments(runs);
  Dof out;
  out.t = static_cast<int>(t.cols());
  const auto n = static_cast<int>(runs.rows());
  if (b == 0) {
    out.d = n - out.t;
    out.lof = n - p - out.d;
  } else {
    Matrix zt(runs.rows(), b + t.cols());
    zt << indicator(blocks, b), t;
    Eigen::FullPivLU<Matrix> lu(zt);
    lu.setThreshold(1e-10);
    out.d = n - static_cast<int>(lu.rank());
    out.lof = n - b - p - out.d;
  }
  return out;
}

struct Criteria {
  double log_dp = 0, log_lp = 0, log_lof_dp = 0, log_lof_lp = 0, log_mse_d_point = 0, log_mse_l = 0;
  double point_bias = 0;
  Matrix dispersion;
  Matrix alias;  // rows for the non-intercept primary terms
  Matrix sandwich;
};

/// Every elementary criterion from the printed formulas, with explicit n x n
/// projections. Unblocked: `intercept` is the intercept column of xp; the
/// dispersion matrix uses the intercept-including X_p, the other criteria the
/// centred X_{p-1}. Blocked: Q = I - Z(Z'Z)^-1 Z' and the dispersion matrix is
/// built from the augmented [Z, X_p].
inline Criteria criteria(const Matrix& xp, const Matrix& xq, const std::vector<int>& blocks, int b, int intercept,
                         int d, double tau2, double alpha = 0.05) {
  const Eigen::Index n = xp.rows();
  const Eigen::Index q = xq.cols();
  Matrix q_proj = Matrix::Identity(n, n);
  Matrix xr;
  Matrix augmented;
  if (b == 0) {
    q_proj -= Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    xr.resize(n, xp.cols() - 1);
    for (Eigen::Index j = 0, c = 0; j < xp.cols(); ++j) {
      if (j != intercept) xr.col(c++) = xp.col(j);
    }
    augmented = xp;
  } else {
    const Matrix z = indicator(blocks, b);
    q_proj -= z * inverse(z.transpose() * z) * z.transpose();
    xr = xp;
    augmented.resize(n, b + xp.cols());
    augmented << z, xp;
  }
  const auto pr = static_cast<double>(xr.cols());
  const Matrix m = xr.transpose() * q_proj * xr;
  const Matrix m_inv = inverse(m);
  Criteria c;
  c.alias = m_inv * xr.transpose() * q_proj * xq;
  c.sandwich = xq.transpose() * q_proj * xr * m_inv * xr.transpose() * q_proj * xq;
  c.dispersion = xq.transpose() * xq -
                 xq.transpose() * augmented * inverse(augmented.transpose() * augmented) * augmented.transpose() * xq;
  const double inf = std::numeric_limits<double>::infinity();
  const double log_det_m = log_det(m);
  if (d > 0) {
    c.log_dp = -log_det_m / pr + std::log(f_quantile(static_cast<int>(pr), d, 1 - alpha));
    c.log_lp = std::log(m_inv.trace() / pr) + std::log(f_quantile(1, d, 1 - alpha));
  } else {
    c.log_dp = c.log_lp = inf;
  }
  if (q > 0) {
    const Matrix post = c.dispersion + Matrix::Identity(q, q) / tau2;
    if (d > 0) {
      c.log_lof_dp = -log_det(post) / static_cast<double>(q) +
                     std::log(f_quantile(static_cast<int>(q), d, 1 - alpha));
      c.log_lof_lp = std::log(inverse(post).trace() / static_cast<double>(q)) + std::log(f_quantile(1, d, 1 - alpha));
    } else {
      c.log_lof_dp = c.log_lof_lp = inf;
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
      for (Eigen::Index j = 0; j < q; ++j) total += c.sandwich(i, j);
    }
    c.point_bias = std::log(1.0 + tau2 * total);
  }
  c.log_mse_d_point = (-log_det_m + c.point_bias) / pr;
  double mse_trace = m_inv.trace();
  for (Eigen::Index i = 0; i < c.alias.rows(); ++i) {
    for (Eigen::Index j = 0; j < q; ++j) mse_trace += tau2 * c.alias(i, j) * c.alias(i, j);
  }
  c.log_mse_l = std::log(mse_trace / pr);
  return c;
}

/// Random design drawn from the grid of `space`, optionally blocked.
inline rsdesign::Design random_design(const rsdesign::FactorSpace& space, int n, std::mt19937_64& rng,
                                      const std::vector<int>& block_sizes = {}) {
  rsdesign::Design d;
  d.runs.resize(n, space.k());
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < space.k(); ++f) {
      const auto& lv = space.levels(f);
      std::uniform_int_distribution<std::size_t> pick(0, lv.size() - 1);
      d.runs(i, f) = lv[pick(rng)];
    }
  }
  if (!block_sizes.empty()) {
    d.block_count = static_cast<int>(block_sizes.size());
    for (std::size_t b = 0; b < block_sizes.size(); ++b) {
      for (int i = 0; i < block_sizes[b]; ++i) d.blocks.push_back(static_cast<int>(b) + 1);
    }
  }
  return d;
}

}  // namespace oracle
