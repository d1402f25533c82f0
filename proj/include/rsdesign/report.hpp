#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsdesign/criteria.hpp"

namespace rsdesign {

/// Percentages above 100 by more than this are flagged as stale references.
inline constexpr double kStalenessTolerance = 1e-6;

/// 100 * reference / value on the log scale; 0 for infinite values.
double efficiency_percent(double log_value, double reference_log_value);

/// Efficiency of `design` for one elementary criterion under `evaluator`.
double efficiency(const Evaluator& evaluator, const Design& design, Elementary criterion, double reference_log_value);

/// Best known value of one elementary criterion at one tau2.
struct Reference {
  Elementary criterion = Elementary::dp;
  double tau2 = 1.0;
  double log_value = 0.0;
  std::optional<Design> design;
  nlohmann::json provenance = nlohmann::json::object();
};

class ReferenceOptima {
 public:
  const std::vector<Reference>& entries() const { return entries_; }
  const Reference* find(Elementary criterion, double tau2) const;
  /// Keeps the smaller value when a reference for (criterion, tau2) exists.
  void offer(Reference reference);

  nlohmann::json to_json() const;
  static ReferenceOptima from_json(const nlohmann::json& j, const FactorSpace& space);

 private:
  std::vector<Reference> entries_;
};

/// One design to report.
struct ReportEntry {
  Design design;
  std::optional<Design> unconstrained;  // optimum of the same compound without fixed runs
  std::string label;
};

struct EfficiencyRow {
  std::string label;
  std::array<double, 3> weights{};
  double tau2 = 1.0;
  DofSummary dof;
  std::array<std::optional<double>, 6> efficiency;  // unset when no reference is known
  double compound_log = 0.0;
  std::optional<double> relative_efficiency;
  bool stale = false;
};

struct EfficiencyReport {
  CriterionFamily family = CriterionFamily::determinant;
  std::vector<EfficiencyRow> rows;
  std::vector<std::string> warnings;
};

/// Criterion settings for one report row: `objective` scores the compound
/// (search settings), `reporting` scores the elementary efficiencies.
struct ReportSettings {
  CriterionConfig objective;
  CriterionConfig reporting;
  ModelForm form = ModelForm::intercept_excluded;
};

/// Rows in entry order; settings[i] holds the criterion settings of entries[i].
EfficiencyReport summarize(const std::vector<ReportEntry>& entries, const ModelSpec& spec,
                           const std::vector<ReportSettings>& settings, const ReferenceOptima& references);

/// References taken as the best value among the entries themselves.
ReferenceOptima self_references(const std::vector<ReportEntry>& entries, const ModelSpec& spec,
                                const std::vector<ReportSettings>& settings);

void write_report_csv(std::ostream& out, const EfficiencyReport& report);
nlohmann::json report_to_json(const EfficiencyReport& report);

/// 2-decimal rounding used by both renderings.
double round2(double value);

nlohmann::json evaluation_to_json(const Evaluation& evaluation);
nlohmann::json design_to_json(const Design& design);
Design design_from_json(const nlohmann::json& j, const FactorSpace& space);

}  // namespace rsdesign
