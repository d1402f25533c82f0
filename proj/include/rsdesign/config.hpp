#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsdesign/criteria.hpp"
#include "rsdesign/search.hpp"

namespace rsdesign {

/// A complete experiment description as read from a JSON configuration file.
/// The compound criterion is run over every (weights, tau2) combination.
struct ExperimentConfig {
  std::string name;
  ModelSpec spec{FactorSpace::uniform(1, {-1.0, 1.0}), {}, {}};
  int n = 0;
  std::vector<int> block_sizes;
  std::vector<FixedRun> fixed_runs;
  ModelForm form = ModelForm::intercept_excluded;

  CriterionConfig base;  // family, alphas, trace weights, search estimator, seed
  std::vector<std::array<double, 3>> weights;
  std::vector<double> tau2;
  std::vector<int> mc_samples;  // one per tau2 value

  Estimator report_estimator = Estimator::mc;
  std::vector<int> report_mc_samples;  // one per tau2 value

  int restarts = 1;
  int max_passes = 50;
  std::uint64_t search_seed = 1;
  int threads = 0;

  nlohmann::json source;  // the parsed document, echoed into run manifests

  bool blocked() const { return !block_sizes.empty(); }
  /// Criterion used as the search objective for one combination.
  CriterionConfig objective(std::size_t weights_index, std::size_t tau2_index) const;
  /// Same weights and tau2 with the reporting estimator.
  CriterionConfig reporting(std::size_t weights_index, std::size_t tau2_index) const;
  SearchConfig search() const;
};

/// Validates everything up front. Throws ConfigError whose message lists every
/// problem found, one per line, each prefixed with its field path.
ExperimentConfig parse_config(const nlohmann::json& document);
ExperimentConfig load_config_file(const std::string& path);

std::vector<std::string> preset_names();
/// Shipped presets: "example1" (5 factors, 40 runs) and "case-study" (3 factors, 2 blocks of 18).
nlohmann::json preset_json(const std::string& name);

/// Parses "1/3", "0.25" or a JSON number. "1/q" and "q" are resolved against q when q > 0.
double parse_fraction(const nlohmann::json& value, int q = 0);

}  // namespace rsdesign
