#include "rsdesign/criteria.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <tuple>

namespace rsdesign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string field_error(const std::string& field, const std::string& message) {
  return "criterion." + field + ": " + message;
}

}  // namespace

std::string to_string(CriterionFamily family) {
  return family == CriterionFamily::determinant ? "determinant" : "trace";
}

std::string to_string(Estimator estimator) { return estimator == Estimator::mc ? "mc" : "point_prior"; }

std::string to_string(ModelForm form) {
  switch (form) {
    case ModelForm::full:
      return "full";
    case ModelForm::intercept_excluded:
      return "intercept_excluded";
    case ModelForm::blocked:
      return "blocked";
  }
  return "unknown";
}

void CriterionConfig::validate() const {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError(field_error("weights", "weights must be non-negative"));
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-12) {
    throw ConfigError(field_error("weights", "weights must sum to 1 (got " + std::to_string(sum) + ")"));
  }
  if (!(tau2 > 0.0) || !std::isfinite(tau2)) throw ConfigError(field_error("tau2", "must be positive and finite"));
  auto check_alpha = [](double a, const char* name) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError(field_error(name, "must lie in (0, 1)"));
  };
  check_alpha(alpha_dp, "alpha_dp");
  check_alpha(alpha_lp, "alpha_lp");
  check_alpha(alpha_lof, "alpha_lof");
  for (double w : inference_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError(field_error("W", "entries must be non-negative"));
  }
  for (double w : lof_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError(field_error("lof_weights", "entries must be non-negative"));
  }
  if (estimator == Estimator::mc && mc_samples < 1) {
    throw ConfigError(field_error("mc_samples", "must be at least 1 for the mc estimator"));
  }
}

MatrixBundle build_bundle(const Matrix& xp, const Matrix& xq, std::span<const int> blocks, int block_count,
                          ModelForm form, int intercept_column) {
  MatrixBundle b;
  b.form = form;
  b.n = static_cast<int>(xp.rows());
  b.q = static_cast<int>(xq.cols());
  b.xp = xp;
  b.xq = xq;
  b.blocks.assign(blocks.begin(), blocks.end());
  b.block_count = block_count;

  switch (form) {
    case ModelForm::full:
      b.xr = xp;
      b.projected_xr = xp;
      b.projected_xq = xq;
      break;
    case ModelForm::intercept_excluded: {
      if (intercept_column < 0) throw ConfigError("intercept_excluded form needs an intercept in the primary model");
      b.xr.resize(xp.rows(), xp.cols() - 1);
      for (Eigen::Index j = 0, c = 0; j < xp.cols(); ++j) {
        if (j != intercept_column) b.xr.col(c++) = xp.col(j);
      }
      b.projected_xr = b.xr.rowwise() - b.xr.colwise().mean();
      b.projected_xq = xq.rowwise() - xq.colwise().mean();
      break;
    }
    case ModelForm::blocked: {
      if (block_count < 1 || static_cast<int>(blocks.size()) != b.n) {
        throw ConfigError("blocked form needs a block index for every run");
      }
      b.xr = xp;
      Matrix sums_r = Matrix::Zero(block_count, xp.cols());
      Matrix sums_q = Matrix::Zero(block_count, xq.cols());
      std::vector<int> counts(static_cast<std::size_t>(block_count), 0);
      for (int i = 0; i < b.n; ++i) {
        const int blk = blocks[static_cast<std::size_t>(i)] - 1;
        sums_r.row(blk) += xp.row(i);
        sums_q.row(blk) += xq.row(i);
        ++counts[static_cast<std::size_t>(blk)];
      }
      b.projected_xr = xp;
      b.projected_xq = xq;
      for (int i = 0; i < b.n; ++i) {
        const int blk = blocks[static_cast<std::size_t>(i)] - 1;
        const double c = counts[static_cast<std::size_t>(blk)];
        b.projected_xr.row(i) -= sums_r.row(blk) / c;
        b.projected_xq.row(i) -= sums_q.row(blk) / c;
      }
      break;
    }
  }
  b.p_reduced = static_cast<int>(b.xr.cols());
  if (b.p_reduced < 1) throw ConfigError("no primary terms left after removing the intercept");

  b.information.noalias() = b.projected_xr.transpose() * b.projected_xr;
  try {
    const numerics::Cholesky chol(b.information);
    b.information_log_det = chol.log_det();
    b.information_inverse = chol.inverse();
    if (b.q > 0) {
      b.cross.noalias() = b.projected_xr.transpose() * b.projected_xq;
      b.alias = chol.solve(b.cross);
      b.sandwich.noalias() = b.cross.transpose() * b.alias;
      b.sandwich = 0.5 * (b.sandwich + b.sandwich.transpose()).eval();
      b.dispersion.noalias() = b.projected_xq.transpose() * b.projected_xq;
      b.dispersion -= b.sandwich;
    } else {
      b.cross.resize(b.p_reduced, 0);
      b.alias.resize(b.p_reduced, 0);
      b.sandwich.resize(0, 0);
      b.dispersion.resize(0, 0);
    }
  } catch (const NotPositiveDefinite& e) {
    throw SingularInformation(std::string("information matrix is singular: ") + e.what());
  }
  return b;
}

MatrixBundle build_bundle(const Design& design, const ModelSpec& spec, ModelForm form) {
  return build_bundle(model_matrix(design.runs, spec.primary), model_matrix(design.runs, spec.potential),
                      design.blocks, design.block_count, form, spec.intercept_index());
}

Matrix projection_matrix(const MatrixBundle& bundle) {
  const int n = bundle.n;
  Matrix q = Matrix::Identity(n, n);
  if (bundle.form == ModelForm::intercept_excluded) {
    q.array() -= 1.0 / n;
  } else if (bundle.form == ModelForm::blocked) {
    Matrix z = Matrix::Zero(n, bundle.block_count);
    for (int i = 0; i < n; ++i) z(i, bundle.blocks[static_cast<std::size_t>(i)] - 1) = 1.0;
    const Matrix ztz = z.transpose() * z;
    q -= z * numerics::inverse(ztz) * z.transpose();
  }
  return q;
}

MseSampler::MseSampler(int samples, int q, std::uint64_t seed) : draws_(samples, q), seed_(seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < samples; ++i) {
    for (int j = 0; j < q; ++j) draws_(i, j) = normal(rng);
  }
}

double f_upper_point(int df1, int df2, double alpha) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, double>, double> memo;
  const auto key = std::make_tuple(df1, df2, alpha);
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
  }
  const double value = numerics::f_quantile({df1, df2, 1.0 - alpha});
  std::lock_guard<std::mutex> lock(mutex);
  memo.emplace(key, value);
  return value;
}

namespace {

double weighted_trace(const Matrix& m, const std::vector<double>& weights) {
  if (weights.empty()) return m.trace();
  if (static_cast<Eigen::Index>(weights.size()) != m.rows()) {
    throw ConfigError("trace weight vector has " + std::to_string(weights.size()) + " entries, expected " +
                      std::to_string(m.rows()));
  }
  double t = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) t += weights[static_cast<std::size_t>(i)] * m(i, i);
  return t;
}

Matrix posterior_precision(const MatrixBundle& bundle, double tau2) {
  Matrix m = bundle.dispersion;
  m.diagonal().array() += 1.0 / tau2;
  return m;
}

}  // namespace

double log_dp_s(const MatrixBundle& bundle, const DofSummary& dof, double alpha_dp) {
  if (dof.d <= 0) return kInf;
  return -bundle.information_log_det / bundle.p_reduced + std::log(f_upper_point(bundle.p_reduced, dof.d, alpha_dp));
}

double log_lp_s(const MatrixBundle& bundle, const DofSummary& dof, double alpha_lp,
                const std::vector<double>& weights) {
  if (dof.d <= 0) return kInf;
  const double tr = weighted_trace(bundle.information_inverse, weights) / bundle.p_reduced;
  return std::log(tr) + std::log(f_upper_point(1, dof.d, alpha_lp));
}

double log_lof_dp(const MatrixBundle& bundle, const DofSummary& dof, double tau2, double alpha_lof) {
  if (bundle.q < 1) throw ConfigError("lack-of-fit criteria need at least one potential term");
  if (dof.d <= 0) return kInf;
  const double log_det = numerics::log_det_psd(posterior_precision(bundle, tau2));
  return -log_det / bundle.q + std::log(f_upper_point(bundle.q, dof.d, alpha_lof));
}

double log_lof_lp(const MatrixBundle& bundle, const DofSummary& dof, double tau2, double alpha_lof,
                  const std::vector<double>& weights) {
  if (bundle.q < 1) throw ConfigError("lack-of-fit criteria need at least one potential term");
  if (dof.d <= 0) return kInf;
  const Matrix covariance = numerics::inverse_spd(posterior_precision(bundle, tau2));
  const double tr = weighted_trace(covariance, weights) / bundle.q;
  return std::log(tr) + std::log(f_upper_point(1, dof.d, alpha_lof));
}

double log_mse_d(const MatrixBundle& bundle, double bias) {
  return (-bundle.information_log_det + bias) / bundle.p_reduced;
}

double log_mse_l(const MatrixBundle& bundle, double tau2) {
  const double tr = bundle.information_inverse.trace() + tau2 * bundle.alias.squaredNorm();
  return std::log(tr / bundle.p_reduced);
}

double dp_s(const MatrixBundle& bundle, const DofSummary& dof, double alpha_dp) {
  return std::exp(log_dp_s(bundle, dof, alpha_dp));
}

double lp_s(const MatrixBundle& bundle, const DofSummary& dof, double alpha_lp, const std::vector<double>& weights) {
  return std::exp(log_lp_s(bundle, dof, alpha_lp, weights));
}

const Matrix& dispersion_matrix(const MatrixBundle& bundle) { return bundle.dispersion; }

double lof_dp(const MatrixBundle& bundle, const DofSummary& dof, double tau2, double alpha_lof) {
  return std::exp(log_lof_dp(bundle, dof, tau2, alpha_lof));
}

double lof_lp(const MatrixBundle& bundle, const DofSummary& dof, double tau2, double alpha_lof,
              const std::vector<double>& weights) {
  return std::exp(log_lof_lp(bundle, dof, tau2, alpha_lof, weights));
}

double mse_bias_point_prior(const MatrixBundle& bundle, double tau2) {
  if (bundle.q == 0) return 0.0;
  return std::log1p(tau2 * bundle.sandwich.sum());
}

McEstimate mse_bias_mc(const MatrixBundle& bundle, const MseSampler& sampler, double tau2) {
  if (sampler.q() != bundle.q) {
    throw ConfigError("MC sampler has dimension " + std::to_string(sampler.q()) + " but the model has " +
                      std::to_string(bundle.q) + " potential terms");
  }
  const Matrix& z = sampler.standard_draws();
  const Vector quad = ((z * bundle.sandwich).array() * z.array()).rowwise().sum();
  const Eigen::ArrayXd values = (tau2 * quad.array()).log1p();
  McEstimate est;
  const double count = static_cast<double>(values.size());
  est.mean = values.mean();
  if (values.size() > 1) {
    const double var = (values - est.mean).square().sum() / (count - 1.0);
    est.standard_error = std::sqrt(var / count);
  }
  return est;
}

double mse_d(const MatrixBundle& bundle, const DofSummary&, const CriterionConfig& config,
             const MseSampler* sampler) {
  double bias = 0.0;
  if (config.estimator == Estimator::mc) {
    if (sampler == nullptr) throw ConfigError("mc estimator needs a sampler");
    bias = mse_bias_mc(bundle, *sampler, config.tau2).mean;
  } else {
    bias = mse_bias_point_prior(bundle, config.tau2);
  }
  return std::exp(log_mse_d(bundle, bias));
}

double mse_l(const MatrixBundle& bundle, double tau2) { return std::exp(log_mse_l(bundle, tau2)); }

const Matrix& blocked_alias(const MatrixBundle& bundle) {
  if (bundle.form != ModelForm::blocked) throw ConfigError("blocked_alias needs a blocked bundle");
  return bundle.alias;
}

std::string to_string(Elementary criterion) {
  switch (criterion) {
    case Elementary::dp:
      return "DP";
    case Elementary::lof_dp:
      return "LoF(DP)";
    case Elementary::mse_d:
      return "MSE(D)";
    case Elementary::lp:
      return "LP";
    case Elementary::lof_lp:
      return "LoF(LP)";
    case Elementary::mse_l:
      return "MSE(L)";
  }
  return "unknown";
}

Elementary elementary_from_string(const std::string& name) {
  for (auto c : kAllElementary) {
    if (to_string(c) == name) return c;
  }
  throw ConfigError("unknown criterion '" + name + "'");
}

bool f_bearing(Elementary criterion) { return criterion != Elementary::mse_d && criterion != Elementary::mse_l; }

CriterionFamily family_of(Elementary criterion) {
  return static_cast<int>(criterion) < 3 ? CriterionFamily::determinant : CriterionFamily::trace;
}

int component_of(Elementary criterion) { return static_cast<int>(criterion) % 3; }

Evaluator::Evaluator(ModelSpec spec, CriterionConfig config, ModelForm form)
    : spec_(std::move(spec)), config_(std::move(config)), form_(form) {
  spec_.validate();
  config_.validate();
  if (form_ == ModelForm::blocked && spec_.intercept_index() >= 0) {
    throw ConfigError("blocked designs absorb the intercept into block effects; remove it from the primary terms");
  }
  if (form_ == ModelForm::intercept_excluded && spec_.intercept_index() < 0) {
    throw ConfigError("the primary model needs an intercept term");
  }
  if (spec_.q() == 0 && config_.weights[kLackOfFit] > 0.0) {
    throw ConfigError("criterion.weights: lack-of-fit weight needs at least one potential term");
  }
  if (config_.estimator == Estimator::mc && spec_.q() > 0) {
    sampler_.emplace(config_.mc_samples, spec_.q(), config_.seed);
  }
}

double Evaluator::mse_bias(const MatrixBundle& bundle, double* standard_error) const {
  if (config_.estimator == Estimator::mc && sampler_) {
    const auto est = mse_bias_mc(bundle, *sampler_, config_.tau2);
    if (standard_error) *standard_error = est.standard_error;
    return est.mean;
  }
  if (standard_error) *standard_error = 0.0;
  return mse_bias_point_prior(bundle, config_.tau2);
}

Evaluation Evaluator::evaluate_bundle(const MatrixBundle& bundle, const DofSummary& dof,
                                      bool all_components) const {
  Evaluation ev;
  ev.family = config_.family;
  ev.dof = dof;
  const auto& w = config_.weights;
  const bool det = config_.family == CriterionFamily::determinant;

  if (all_components || w[kInference] > 0.0) {
    ev.log_components[kInference] = det ? log_dp_s(bundle, dof, config_.alpha_dp)
                                        : log_lp_s(bundle, dof, config_.alpha_lp, config_.inference_weights);
  }
  if (bundle.q > 0 && (all_components || w[kLackOfFit] > 0.0)) {
    ev.log_components[kLackOfFit] =
        det ? log_lof_dp(bundle, dof, config_.tau2, config_.alpha_lof)
            : log_lof_lp(bundle, dof, config_.tau2, config_.alpha_lof, config_.lof_weights);
  }
  if (all_components || w[kMse] > 0.0) {
    if (det) {
      double se = 0.0;
      const double bias = mse_bias(bundle, &se);
      ev.log_components[kMse] = log_mse_d(bundle, bias);
      if (config_.estimator == Estimator::mc) ev.mse_bias_standard_error = se;
    } else {
      ev.log_components[kMse] = log_mse_l(bundle, config_.tau2);
    }
  }

  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (w[i] <= 0.0) continue;
    const double v = *ev.log_components[i];
    if (v == kInf) {
      total = kInf;
      break;
    }
    total += w[i] * v;
  }
  ev.compound_log = total;
  return ev;
}

Evaluation Evaluator::evaluate(const Matrix& xp, const Matrix& xq, std::span<const int> treatment,
                               std::span<const int> blocks, int block_count, bool all_components) const {
  const DofSummary dof = dof_from_treatments(treatment, blocks, block_count, spec_.p());
  const MatrixBundle bundle = build_bundle(xp, xq, blocks, block_count, form_, spec_.intercept_index());
  return evaluate_bundle(bundle, dof, all_components);
}

namespace {

void check_form(const Design& design, ModelForm form) {
  if (form == ModelForm::blocked && !design.blocked()) {
    throw ConfigError("blocked criteria need a design with block assignments");
  }
  if (form != ModelForm::blocked && design.blocked()) {
    throw ConfigError("design carries blocks but the criteria are unblocked");
  }
}

}  // namespace

Evaluation Evaluator::evaluate(const Design& design, bool all_components) const {
  check_form(design, form_);
  const DofSummary dof = pure_error_dof(design, spec_);
  const MatrixBundle bundle = build_bundle(design, spec_, form_);
  return evaluate_bundle(bundle, dof, all_components);
}

std::array<double, 6> Evaluator::elementary_logs(const Design& design) const {
  check_form(design, form_);
  if (spec_.q() == 0) throw ConfigError("elementary lack-of-fit and MSE criteria need potential terms");
  const DofSummary dof = pure_error_dof(design, spec_);
  const MatrixBundle bundle = build_bundle(design, spec_, form_);
  std::array<double, 6> out{};
  out[0] = log_dp_s(bundle, dof, config_.alpha_dp);
  out[1] = log_lof_dp(bundle, dof, config_.tau2, config_.alpha_lof);
  out[2] = log_mse_d(bundle, mse_bias(bundle));
  out[3] = log_lp_s(bundle, dof, config_.alpha_lp, config_.inference_weights);
  out[4] = log_lof_lp(bundle, dof, config_.tau2, config_.alpha_lof, config_.lof_weights);
  out[5] = log_mse_l(bundle, config_.tau2);
  return out;
}

Evaluation compound(const Design& design, const ModelSpec& spec, const CriterionConfig& config, ModelForm form) {
  return Evaluator(spec, config, form).evaluate(design);
}

ModelForm default_form(const Design& design) {
  return design.blocked() ? ModelForm::blocked : ModelForm::intercept_excluded;
}

}  // namespace rsdesign
