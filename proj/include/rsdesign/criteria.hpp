#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsdesign/design.hpp"
#include "rsdesign/model.hpp"

namespace rsdesign {

enum class CriterionFamily { determinant, trace };
enum class Estimator { point_prior, mc };

/// How the primary terms enter the inference and MSE components.
///  - full: all of X_p including the intercept, no projection (elementary criteria).
///  - intercept_excluded: intercept dropped, columns centred by Q0 = I - 11'/n.
///  - blocked: block effects Z absorbed by Q = I - Z(Z'Z)^-1 Z'; primary has no intercept.
enum class ModelForm { full, intercept_excluded, blocked };

std::string to_string(CriterionFamily family);
std::string to_string(Estimator estimator);
std::string to_string(ModelForm form);

// Component order used throughout: inference (DP or LP), lack of fit, MSE.
inline constexpr int kInference = 0;
inline constexpr int kLackOfFit = 1;
inline constexpr int kMse = 2;

struct CriterionConfig {
  CriterionFamily family = CriterionFamily::determinant;
  std::array<double, 3> weights{1.0, 0.0, 0.0};
  double tau2 = 1.0;
  double alpha_dp = 0.05;
  double alpha_lp = 0.05;
  double alpha_lof = 0.05;
  std::vector<double> inference_weights;  // diagonal of W; empty means identity
  std::vector<double> lof_weights;        // diagonal of PP'; empty means identity
  Estimator estimator = Estimator::point_prior;
  int mc_samples = 1000;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Matrices derived from one design. `reduced` refers to the primary columns
/// that enter the inference criteria (intercept removed in intercept_excluded form).
struct MatrixBundle {
  ModelForm form = ModelForm::intercept_excluded;
  int n = 0;
  int p_reduced = 0;
  int q = 0;
  std::vector<int> blocks;
  int block_count = 0;

  Matrix xp;            // n x p
  Matrix xq;            // n x q
  Matrix xr;            // n x p_reduced
  Matrix projected_xr;  // Q X_r
  Matrix projected_xq;  // Q X_q
  Matrix information;   // X_r' Q X_r: M, M0 or tilde-M
  Matrix information_inverse;
  double information_log_det = 0.0;
  Matrix cross;       // X_r' Q X_q
  Matrix alias;       // information^-1 cross: A, its non-intercept rows, or R_Q
  Matrix sandwich;    // cross' information^-1 cross
  Matrix dispersion;  // L or tilde-L
};

/// Throws SingularInformation when the reduced information matrix is not PD.
MatrixBundle build_bundle(const Matrix& xp, const Matrix& xq, std::span<const int> blocks, int block_count,
                          ModelForm form, int intercept_column);
MatrixBundle build_bundle(const Design& design, const ModelSpec& spec, ModelForm form);

/// The n x n projection Q (identity, Q0 or the block projection) for the bundle's form.
Matrix projection_matrix(const MatrixBundle& bundle);

/// Standard normal draws shared by every evaluation in a search. Draws of
/// beta_q / sigma ~ N(0, tau2 I) are these rows scaled by sqrt(tau2).
class MseSampler {
 public:
  MseSampler(int samples, int q, std::uint64_t seed);

  int samples() const { return static_cast<int>(draws_.rows()); }
  int q() const { return static_cast<int>(draws_.cols()); }
  std::uint64_t seed() const { return seed_; }
  const Matrix& standard_draws() const { return draws_; }
  Matrix draws(double tau2) const { return std::sqrt(tau2) * draws_; }

 private:
  Matrix draws_;
  std::uint64_t seed_;
};

struct McEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Upper alpha point F_{df1, df2; 1 - alpha}, memoised across calls.
double f_upper_point(int df1, int df2, double alpha);

double dp_s(const MatrixBundle& bundle, const DofSummary& dof, double alpha_dp);
double lp_s(const MatrixBundle& bundle, const DofSummary& dof, double alpha_lp,
            const std::vector<double>& weights = {});
const Matrix& dispersion_matrix(const MatrixBundle& bundle);
double lof_dp(const MatrixBundle& bundle, const DofSummary& dof, double tau2, double alpha_lof);
double lof_lp(const MatrixBundle& bundle, const DofSummary& dof, double tau2, double alpha_lof,
              const std::vector<double>& weights = {});
double mse_bias_point_prior(const MatrixBundle& bundle, double tau2);
McEstimate mse_bias_mc(const MatrixBundle& bundle, const MseSampler& sampler, double tau2);
/// |info|^(-1/p_r) exp(bias)^(1/p_r) with the bias from the configured estimator.
double mse_d(const MatrixBundle& bundle, const DofSummary& dof, const CriterionConfig& config,
             const MseSampler* sampler);
double mse_l(const MatrixBundle& bundle, double tau2);
/// R_Q for blocked bundles.
const Matrix& blocked_alias(const MatrixBundle& bundle);

// Log-scale versions; +infinity where an F quantile has no pure error DoF.
double log_dp_s(const MatrixBundle& bundle, const DofSummary& dof, double alpha_dp);
double log_lp_s(const MatrixBundle& bundle, const DofSummary& dof, double alpha_lp,
                const std::vector<double>& weights = {});
double log_lof_dp(const MatrixBundle& bundle, const DofSummary& dof, double tau2, double alpha_lof);
double log_lof_lp(const MatrixBundle& bundle, const DofSummary& dof, double tau2, double alpha_lof,
                  const std::vector<double>& weights = {});
double log_mse_d(const MatrixBundle& bundle, double bias);
double log_mse_l(const MatrixBundle& bundle, double tau2);

/// The six elementary criteria in a fixed order.
enum class Elementary { dp, lof_dp, mse_d, lp, lof_lp, mse_l };
inline constexpr std::array<Elementary, 6> kAllElementary{Elementary::dp,  Elementary::lof_dp, Elementary::mse_d,
                                                          Elementary::lp,  Elementary::lof_lp, Elementary::mse_l};
std::string to_string(Elementary criterion);
Elementary elementary_from_string(const std::string& name);
bool f_bearing(Elementary criterion);
/// The family and component index an elementary criterion belongs to.
CriterionFamily family_of(Elementary criterion);
int component_of(Elementary criterion);

struct Evaluation {
  CriterionFamily family = CriterionFamily::determinant;
  std::array<std::optional<double>, 3> log_components;  // unset when not evaluated
  double compound_log = 0.0;
  std::optional<double> mse_bias_standard_error;  // MC estimator only
  DofSummary dof;
};

/// Evaluates compound and elementary criteria for one (spec, config, form).
/// Holds the MC sampler so every design it scores sees the same draws.
class Evaluator {
 public:
  Evaluator(ModelSpec spec, CriterionConfig config, ModelForm form);

  const ModelSpec& spec() const { return spec_; }
  const CriterionConfig& config() const { return config_; }
  ModelForm form() const { return form_; }
  const MseSampler* sampler() const { return sampler_ ? &*sampler_ : nullptr; }

  /// Compound criterion. With all_components set, components carrying zero
  /// weight are also evaluated (reporting); otherwise they are skipped.
  Evaluation evaluate(const Design& design, bool all_components = true) const;

  /// Same, from prebuilt model matrices and treatment ids (search hot path).
  Evaluation evaluate(const Matrix& xp, const Matrix& xq, std::span<const int> treatment,
                      std::span<const int> blocks, int block_count, bool all_components) const;

  /// Log values of all six elementary criteria under this evaluator's tau2,
  /// alphas and estimator.
  std::array<double, 6> elementary_logs(const Design& design) const;

  double mse_bias(const MatrixBundle& bundle, double* standard_error = nullptr) const;

 private:
  Evaluation evaluate_bundle(const MatrixBundle& bundle, const DofSummary& dof, bool all_components) const;

  ModelSpec spec_;
  CriterionConfig config_;
  ModelForm form_;
  std::optional<MseSampler> sampler_;
};

/// One-shot compound evaluation.
Evaluation compound(const Design& design, const ModelSpec& spec, const CriterionConfig& config, ModelForm form);

/// Default form for a design: blocked when it carries blocks, otherwise intercept_excluded.
ModelForm default_form(const Design& design);

}  // namespace rsdesign
