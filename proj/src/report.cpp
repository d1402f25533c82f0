#include "rsdesign/report.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace rsdesign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool same_tau2(double a, double b) { return std::fabs(a - b) <= 1e-12 * std::max(std::fabs(a), std::fabs(b)); }

nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string format2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", round2(v));
  return buf;
}

const char* component_name(CriterionFamily family, int component) {
  static const char* det[] = {"DP", "LoF(DP)", "MSE(D)"};
  static const char* tr[] = {"LP", "LoF(LP)", "MSE(L)"};
  return family == CriterionFamily::determinant ? det[component] : tr[component];
}

}  // namespace

double round2(double value) { return std::round(value * 100.0) / 100.0; }

double efficiency_percent(double log_value, double reference_log_value) {
  if (std::isinf(log_value) && log_value > 0) return 0.0;
  return 100.0 * std::exp(reference_log_value - log_value);
}

double efficiency(const Evaluator& evaluator, const Design& design, Elementary criterion, double reference_log_value) {
  const auto logs = evaluator.elementary_logs(design);
  return efficiency_percent(logs[static_cast<std::size_t>(criterion)], reference_log_value);
}

const Reference* ReferenceOptima::find(Elementary criterion, double tau2) const {
  for (const auto& r : entries_) {
    if (r.criterion == criterion && same_tau2(r.tau2, tau2)) return &r;
  }
  return nullptr;
}

void ReferenceOptima::offer(Reference reference) {
  if (!std::isfinite(reference.log_value)) return;
  for (auto& r : entries_) {
    if (r.criterion == reference.criterion && same_tau2(r.tau2, reference.tau2)) {
      if (reference.log_value < r.log_value) r = std::move(reference);
      return;
    }
  }
  entries_.push_back(std::move(reference));
}

nlohmann::json ReferenceOptima::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : entries_) {
    nlohmann::json j;
    j["criterion"] = to_string(r.criterion);
    j["tau2"] = r.tau2;
    j["log_value"] = r.log_value;
    j["value"] = std::exp(r.log_value);
    if (r.design) j["design"] = design_to_json(*r.design);
    j["provenance"] = r.provenance;
    arr.push_back(std::move(j));
  }
  return nlohmann::json{{"references", arr}};
}

ReferenceOptima ReferenceOptima::from_json(const nlohmann::json& j, const FactorSpace& space) {
  ReferenceOptima out;
  if (!j.contains("references") || !j["references"].is_array()) {
    throw ConfigError("reference file: missing 'references' array");
  }
  for (const auto& e : j["references"]) {
    Reference r;
    r.criterion = elementary_from_string(e.at("criterion").get<std::string>());
    r.tau2 = e.at("tau2").get<double>();
    r.log_value = e.at("log_value").get<double>();
    if (!std::isfinite(r.log_value)) throw ConfigError("reference file: reference values must be finite");
    if (e.contains("design")) r.design = design_from_json(e["design"], space);
    if (e.contains("provenance")) r.provenance = e["provenance"];
    out.entries_.push_back(std::move(r));
  }
  return out;
}

ReferenceOptima self_references(const std::vector<ReportEntry>& entries, const ModelSpec& spec,
                                const std::vector<ReportSettings>& settings) {
  ReferenceOptima refs;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Evaluator ev(spec, settings[i].reporting, settings[i].form);
    const auto logs = ev.elementary_logs(entries[i].design);
    for (auto c : kAllElementary) {
      Reference r;
      r.criterion = c;
      r.tau2 = settings[i].reporting.tau2;
      r.log_value = logs[static_cast<std::size_t>(c)];
      r.design = entries[i].design;
      r.provenance = {{"source", "best among reported designs"}, {"label", entries[i].label}};
      refs.offer(std::move(r));
    }
  }
  return refs;
}

EfficiencyReport summarize(const std::vector<ReportEntry>& entries, const ModelSpec& spec,
                           const std::vector<ReportSettings>& settings, const ReferenceOptima& references) {
  if (settings.size() != entries.size()) throw ConfigError("summarize: one settings entry per design is required");
  EfficiencyReport report;
  if (!settings.empty()) report.family = settings.front().objective.family;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& entry = entries[i];
    const Evaluator objective(spec, settings[i].objective, settings[i].form);
    const Evaluator reporting(spec, settings[i].reporting, settings[i].form);

    EfficiencyRow row;
    row.label = entry.label.empty() ? std::to_string(i + 1) : entry.label;
    row.weights = settings[i].objective.weights;
    row.tau2 = settings[i].objective.tau2;
    const auto ev = objective.evaluate(entry.design, /*all_components=*/false);
    row.dof = ev.dof;
    row.compound_log = ev.compound_log;

    const auto logs = reporting.elementary_logs(entry.design);
    for (auto c : kAllElementary) {
      const auto* ref = references.find(c, settings[i].reporting.tau2);
      if (!ref) continue;
      const double eff = efficiency_percent(logs[static_cast<std::size_t>(c)], ref->log_value);
      row.efficiency[static_cast<std::size_t>(c)] = eff;
      if (eff > 100.0 + kStalenessTolerance) {
        row.stale = true;
        report.warnings.push_back("row " + row.label + ": " + to_string(c) + " efficiency " + format2(eff) +
                                  "% exceeds 100; the stored reference is stale");
      }
    }

    if (entry.unconstrained) {
      const double unconstrained_log = objective.evaluate(*entry.unconstrained, false).compound_log;
      row.relative_efficiency = efficiency_percent(row.compound_log, unconstrained_log);
      if (*row.relative_efficiency > 100.0 + kStalenessTolerance) {
        row.stale = true;
        report.warnings.push_back("row " + row.label + ": relative efficiency " +
                                  format2(*row.relative_efficiency) +
                                  "% exceeds 100; the unconstrained optimum is stale");
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report_csv(std::ostream& out, const EfficiencyReport& report) {
  const char* det_head = "kappa_DP,kappa_LoF(DP),kappa_MSE(D)";
  const char* tr_head = "kappa_LP,kappa_LoF(LP),kappa_MSE(L)";
  out << "row," << (report.family == CriterionFamily::determinant ? det_head : tr_head)
      << ",tau2,PE,LoF,DP,LoF(DP),MSE(D),LP,LoF(LP),MSE(L),compound_log,relative,stale\n";
  for (const auto& row : report.rows) {
    out << row.label;
    for (double w : row.weights) out << ',' << format_exact(w);
    out << ',' << format_exact(row.tau2) << ',' << row.dof.d << ',' << row.dof.lof;
    for (const auto& e : row.efficiency) out << ',' << (e ? format2(*e) : "NA");
    out << ',' << (std::isinf(row.compound_log) ? "inf" : format_exact(row.compound_log));
    out << ',' << (row.relative_efficiency ? format2(*row.relative_efficiency) : "NA");
    out << ',' << (row.stale ? 1 : 0) << '\n';
  }
}

nlohmann::json report_to_json(const EfficiencyReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json r;
    r["row"] = row.label;
    r["weights"] = row.weights;
    r["tau2"] = row.tau2;
    r["dof"] = {{"PE", row.dof.d}, {"LoF", row.dof.lof}, {"t", row.dof.t}, {"residual", row.dof.residual}};
    nlohmann::json eff = nlohmann::json::object();
    for (auto c : kAllElementary) {
      const auto& e = row.efficiency[static_cast<std::size_t>(c)];
      eff[to_string(c)] = e ? nlohmann::json(round2(*e)) : nlohmann::json(nullptr);
    }
    r["efficiency"] = eff;
    r["compound_log"] = number_or_inf(row.compound_log);
    r["relative"] = row.relative_efficiency ? nlohmann::json(round2(*row.relative_efficiency)) : nlohmann::json(nullptr);
    r["stale"] = row.stale;
    rows.push_back(std::move(r));
  }
  return {{"family", to_string(report.family)}, {"rows", rows}, {"warnings", report.warnings}};
}

nlohmann::json evaluation_to_json(const Evaluation& evaluation) {
  nlohmann::json comps = nlohmann::json::object();
  for (int c = 0; c < 3; ++c) {
    const auto& v = evaluation.log_components[static_cast<std::size_t>(c)];
    if (!v) continue;
    comps[component_name(evaluation.family, c)] = {{"log", number_or_inf(*v)}, {"value", number_or_inf(std::exp(*v))}};
  }
  nlohmann::json j{{"family", to_string(evaluation.family)},
                   {"components", comps},
                   {"compound_log", number_or_inf(evaluation.compound_log)},
                   {"dof",
                    {{"t", evaluation.dof.t},
                     {"PE", evaluation.dof.d},
                     {"LoF", evaluation.dof.lof},
                     {"residual", evaluation.dof.residual}}}};
  if (evaluation.mse_bias_standard_error) j["mse_bias_standard_error"] = *evaluation.mse_bias_standard_error;
  return j;
}

nlohmann::json design_to_json(const Design& design) {
  nlohmann::json runs = nlohmann::json::array();
  for (int i = 0; i < design.n(); ++i) runs.push_back(design.point(i));
  nlohmann::json j{{"runs", runs}};
  if (design.blocked()) {
    j["blocks"] = design.blocks;
    j["block_count"] = design.block_count;
  }
  if (!design.fixed.empty()) {
    std::vector<int> f;
    for (bool b : design.fixed) f.push_back(b ? 1 : 0);
    j["fixed"] = f;
  }
  return j;
}

Design design_from_json(const nlohmann::json& j, const FactorSpace& space) {
  Design d;
  const auto& runs = j.at("runs");
  d.runs.resize(static_cast<Eigen::Index>(runs.size()), space.k());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].size() != static_cast<std::size_t>(space.k())) throw ConfigError("design JSON: wrong run dimension");
    for (int f = 0; f < space.k(); ++f) d.runs(static_cast<Eigen::Index>(i), f) = runs[i][static_cast<std::size_t>(f)].get<double>();
  }
  if (j.contains("blocks")) {
    d.blocks = j["blocks"].get<std::vector<int>>();
    d.block_count = j.value("block_count", 0);
  }
  if (j.contains("fixed")) {
    for (int v : j["fixed"].get<std::vector<int>>()) d.fixed.push_back(v != 0);
  }
  d.validate(space);
  return d;
}

}  // namespace rsdesign
