#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rsdesign/config.hpp"
#include "rsdesign/errors.hpp"
#include "rsdesign/report.hpp"
#include "rsdesign/search.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rsdesign;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInit = 3;

struct ConfigSource {
  std::string path;
  std::string preset;
};

ExperimentConfig load(const ConfigSource& src) {
  if (!src.path.empty() && !src.preset.empty()) throw ConfigError("give either --config or --preset, not both");
  if (!src.preset.empty()) return parse_config(preset_json(src.preset));
  if (src.path.empty()) throw ConfigError("a configuration is required (--config FILE or --preset NAME)");
  return load_config_file(src.path);
}

void add_config_options(CLI::App* cmd, ConfigSource& src) {
  cmd->add_option("-c,--config", src.path, "experiment configuration (JSON)");
  cmd->add_option("-p,--preset", src.preset, "shipped preset: example1 or case-study");
}

std::string combo_tag(std::size_t wi, std::size_t ti) {
  return "w" + std::to_string(wi + 1) + "_t" + std::to_string(ti + 1);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

json elementary_json(const std::array<double, 6>& logs) {
  json j = json::object();
  for (auto c : kAllElementary) {
    const double v = logs[static_cast<std::size_t>(c)];
    if (std::isinf(v)) {
      j[to_string(c)] = {{"log", "inf"}, {"value", "inf"}};
    } else {
      j[to_string(c)] = {{"log", v}, {"value", std::exp(v)}};
    }
  }
  return j;
}

json describe_criterion(const CriterionConfig& c) {
  return {{"family", to_string(c.family)},
          {"weights", c.weights},
          {"tau2", c.tau2},
          {"alpha", {{"dp", c.alpha_dp}, {"lp", c.alpha_lp}, {"lof", c.alpha_lof}}},
          {"estimator", to_string(c.estimator)},
          {"mc_samples", c.mc_samples},
          {"seed", c.seed}};
}

/// Evaluation of one design for one (weights, tau2) pair: compound under the
/// search objective, elementary values under the reporting estimator.
json evaluation_record(const ExperimentConfig& cfg, const Design& design, std::size_t wi, std::size_t ti) {
  const Evaluator objective(cfg.spec, cfg.objective(wi, ti), cfg.form);
  const Evaluator reporting(cfg.spec, cfg.reporting(wi, ti), cfg.form);
  json j = evaluation_to_json(objective.evaluate(design, true));
  j["weights"] = cfg.weights[wi];
  j["tau2"] = cfg.tau2[ti];
  j["form"] = to_string(cfg.form);
  j["elementary"] = elementary_json(reporting.elementary_logs(design));
  j["objective"] = describe_criterion(objective.config());
  j["reporting"] = describe_criterion(reporting.config());
  return j;
}

std::vector<std::size_t> select(std::optional<int> one_based, std::size_t count, const char* what) {
  if (!one_based) {
    std::vector<std::size_t> all(count);
    for (std::size_t i = 0; i < count; ++i) all[i] = i;
    return all;
  }
  if (*one_based < 1 || static_cast<std::size_t>(*one_based) > count) {
    throw ConfigError(std::string("--") + what + " must lie between 1 and " + std::to_string(count));
  }
  return {static_cast<std::size_t>(*one_based - 1)};
}

struct SearchOptions {
  ConfigSource src;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> restarts;
  std::optional<int> threads;
  std::optional<int> weights;
  std::optional<int> tau2;
  bool no_fixed = false;
  bool quiet = false;
};

int cmd_search(const SearchOptions& o) {
  ExperimentConfig cfg = load(o.src);
  if (o.seed) cfg.search_seed = *o.seed;
  if (o.restarts) {
    if (*o.restarts < 1) throw ConfigError("--restarts must be at least 1");
    cfg.restarts = *o.restarts;
  }
  if (o.threads) cfg.threads = *o.threads;
  if (o.no_fixed) cfg.fixed_runs.clear();
  const auto wsel = select(o.weights, cfg.weights.size(), "weights");
  const auto tsel = select(o.tau2, cfg.tau2.size(), "tau2");

  fs::create_directories(o.out);
  json runs = json::array();
  std::vector<std::pair<fs::path, Design>> designs;
  std::vector<std::pair<fs::path, json>> evaluations;
  const std::size_t total = wsel.size() * tsel.size();
  std::size_t done = 0;
  for (std::size_t wi : wsel) {
    for (std::size_t ti : tsel) {
      const auto criterion = cfg.objective(wi, ti);
      auto result = optimize(cfg.spec, criterion, cfg.search());
      ++done;
      if (!o.quiet) {
        std::cerr << "[" << done << "/" << total << "] " << combo_tag(wi, ti) << " compound_log "
                  << result.evaluation.compound_log << " PE " << result.evaluation.dof.d << " LoF "
                  << result.evaluation.dof.lof << " (" << result.seconds << " s)\n";
      }
      const std::string tag = combo_tag(wi, ti);
      json record = evaluation_record(cfg, result.best, wi, ti);
      record["search"] = {{"restarts", cfg.restarts},
                          {"max_passes", cfg.max_passes},
                          {"seed", cfg.search_seed},
                          {"restart_values", json::array()},
                          {"accepted_exchanges", result.accepted_exchanges},
                          {"passes", result.passes},
                          {"seconds", result.seconds}};
      for (double v : result.restart_values) {
        record["search"]["restart_values"].push_back(std::isinf(v) ? json("inf") : json(v));
      }
      runs.push_back({{"weights_index", wi + 1},
                      {"tau2_index", ti + 1},
                      {"weights", cfg.weights[wi]},
                      {"tau2", cfg.tau2[ti]},
                      {"design", "design_" + tag + ".csv"},
                      {"evaluation", "evaluation_" + tag + ".json"},
                      {"compound_log", record["compound_log"]},
                      {"seconds", result.seconds}});
      designs.emplace_back(fs::path(o.out) / ("design_" + tag + ".csv"), std::move(result.best));
      evaluations.emplace_back(fs::path(o.out) / ("evaluation_" + tag + ".json"), std::move(record));
    }
  }

  for (const auto& [path, design] : designs) write_design_csv_file(path.string(), design);
  for (const auto& [path, record] : evaluations) write_json_file(path, record);
  json manifest{{"name", cfg.name},
                {"config", cfg.source},
                {"overrides",
                 {{"seed", o.seed ? json(*o.seed) : json(nullptr)},
                  {"restarts", o.restarts ? json(*o.restarts) : json(nullptr)},
                  {"no_fixed", o.no_fixed}}},
                {"search_seed", cfg.search_seed},
                {"restarts", cfg.restarts},
                {"runs", runs}};
  write_json_file(fs::path(o.out) / "manifest.json", manifest);
  return kExitOk;
}

struct EvaluateOptions {
  ConfigSource src;
  std::string design;
  std::string out;
  std::optional<int> weights;
  std::optional<int> tau2;
};

int cmd_evaluate(const EvaluateOptions& o) {
  const ExperimentConfig cfg = load(o.src);
  const Design design = read_design_csv_file(o.design, cfg.spec.space);
  if (design.n() != cfg.n) {
    std::cerr << "warning: design has " << design.n() << " runs, configuration declares " << cfg.n << "\n";
  }
  if (design.blocked() != cfg.blocked()) {
    throw ConfigError(cfg.blocked() ? "configuration is blocked but the design has no block column"
                                    : "design has a block column but the configuration is unblocked");
  }
  json results = json::array();
  for (std::size_t wi : select(o.weights, cfg.weights.size(), "weights")) {
    for (std::size_t ti : select(o.tau2, cfg.tau2.size(), "tau2")) results.push_back(evaluation_record(cfg, design, wi, ti));
  }
  const json doc{{"design", o.design}, {"n", design.n()}, {"evaluations", results}};
  if (o.out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    write_json_file(o.out, doc);
  }
  return kExitOk;
}

struct TableOptions {
  ConfigSource src;
  std::string manifest;
  std::vector<std::string> designs;
  std::string references;
  std::string unconstrained;
  std::optional<int> weights;
  std::optional<int> tau2;
  std::string format = "csv";
  std::string out;
};

struct Row {
  Design design;
  std::size_t wi = 0;
  std::size_t ti = 0;
  std::string label;
};

std::vector<Row> rows_from_manifest(const std::string& path, const ExperimentConfig& cfg) {
  const json m = read_json_file(path);
  const fs::path dir = fs::path(path).parent_path();
  std::vector<Row> rows;
  for (const auto& r : m.at("runs")) {
    Row row;
    row.wi = r.at("weights_index").get<std::size_t>() - 1;
    row.ti = r.at("tau2_index").get<std::size_t>() - 1;
    if (row.wi >= cfg.weights.size() || row.ti >= cfg.tau2.size()) {
      throw ConfigError("manifest '" + path + "' does not match the configuration's weight/tau2 lists");
    }
    row.design = read_design_csv_file((dir / r.at("design").get<std::string>()).string(), cfg.spec.space);
    row.label = combo_tag(row.wi, row.ti);
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_table(const TableOptions& o) {
  const ExperimentConfig cfg = load(o.src);
  std::vector<Row> rows;
  if (!o.manifest.empty()) rows = rows_from_manifest(o.manifest, cfg);
  const std::size_t wi = o.weights ? select(o.weights, cfg.weights.size(), "weights").front() : 0;
  const std::size_t ti = o.tau2 ? select(o.tau2, cfg.tau2.size(), "tau2").front() : 0;
  for (const auto& path : o.designs) {
    rows.push_back({read_design_csv_file(path, cfg.spec.space), wi, ti, fs::path(path).stem().string()});
  }

  std::vector<ReportEntry> entries;
  std::vector<ReportSettings> settings;
  for (auto& r : rows) {
    entries.push_back({std::move(r.design), std::nullopt, r.label});
    settings.push_back({cfg.objective(r.wi, r.ti), cfg.reporting(r.wi, r.ti), cfg.form});
  }
  if (!o.unconstrained.empty()) {
    const auto free_rows = rows_from_manifest(o.unconstrained, cfg);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (const auto& f : free_rows) {
        if (f.wi == rows[i].wi && f.ti == rows[i].ti) entries[i].unconstrained = f.design;
      }
    }
  }
  const ReferenceOptima refs = o.references.empty()
                                   ? self_references(entries, cfg.spec, settings)
                                   : ReferenceOptima::from_json(read_json_file(o.references), cfg.spec.space);
  EfficiencyReport report = summarize(entries, cfg.spec, settings, refs);
  report.family = cfg.base.family;
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';

  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw ConfigError("cannot write '" + o.out + "'");
  }
  std::ostream& out = o.out.empty() ? std::cout : file;
  if (o.format == "json") {
    out << report_to_json(report).dump(2) << '\n';
  } else {
    write_report_csv(out, report);
  }
  return kExitOk;
}

struct ReferencesOptions {
  ConfigSource src;
  std::string out = "references.json";
  std::optional<std::uint64_t> seed;
  std::optional<int> restarts;
  std::optional<int> threads;
  bool no_fixed = false;
};

int cmd_references(const ReferencesOptions& o) {
  ExperimentConfig cfg = load(o.src);
  if (o.seed) cfg.search_seed = *o.seed;
  if (o.restarts) cfg.restarts = *o.restarts;
  if (o.threads) cfg.threads = *o.threads;
  if (o.no_fixed) cfg.fixed_runs.clear();
  ReferenceOptima refs;
  for (std::size_t ti = 0; ti < cfg.tau2.size(); ++ti) {
    for (auto c : kAllElementary) {
      CriterionConfig criterion = cfg.objective(0, ti);
      criterion.family = family_of(c);
      criterion.weights = {0.0, 0.0, 0.0};
      criterion.weights[static_cast<std::size_t>(component_of(c))] = 1.0;
      const auto result = optimize(cfg.spec, criterion, cfg.search());
      CriterionConfig reporting = criterion;
      reporting.estimator = cfg.report_estimator;
      reporting.mc_samples = cfg.report_mc_samples[ti];
      const Evaluator ev(cfg.spec, reporting, cfg.form);
      Reference r;
      r.criterion = c;
      r.tau2 = cfg.tau2[ti];
      r.log_value = ev.elementary_logs(result.best)[static_cast<std::size_t>(c)];
      r.design = result.best;
      r.provenance = {{"restarts", cfg.restarts},
                      {"max_passes", cfg.max_passes},
                      {"seed", cfg.search_seed},
                      {"search", describe_criterion(criterion)},
                      {"reporting", describe_criterion(reporting)},
                      {"fixed_runs", !cfg.fixed_runs.empty()}};
      std::cerr << to_string(c) << " tau2=" << r.tau2 << " log " << r.log_value << " (" << result.seconds
                << " s)\n";
      refs.offer(std::move(r));
    }
  }
  write_json_file(o.out, refs.to_json());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compound-criterion optimal response surface designs"};
  app.require_subcommand(1);

  SearchOptions search_opts;
  auto* search = app.add_subcommand("search", "search for an optimal design per (weights, tau2) combination");
  add_config_options(search, search_opts.src);
  search->add_option("-o,--out", search_opts.out, "output directory")->capture_default_str();
  search->add_option("--seed", search_opts.seed, "override the search seed");
  search->add_option("--restarts", search_opts.restarts, "override the number of restarts");
  search->add_option("--threads", search_opts.threads, "worker threads (0: hardware concurrency)");
  search->add_option("--weights", search_opts.weights, "run only this weight row (1-based)");
  search->add_option("--tau2", search_opts.tau2, "run only this tau2 value (1-based)");
  search->add_flag("--no-fixed", search_opts.no_fixed, "drop fixed runs (unconstrained optimum)");
  search->add_flag("-q,--quiet", search_opts.quiet, "no progress lines");

  EvaluateOptions eval_opts;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a design CSV");
  add_config_options(evaluate, eval_opts.src);
  evaluate->add_option("-d,--design", eval_opts.design, "design CSV")->required();
  evaluate->add_option("-o,--out", eval_opts.out, "write JSON here instead of stdout");
  evaluate->add_option("--weights", eval_opts.weights, "only this weight row (1-based)");
  evaluate->add_option("--tau2", eval_opts.tau2, "only this tau2 value (1-based)");

  TableOptions table_opts;
  auto* table = app.add_subcommand("table", "efficiency table for a set of designs");
  add_config_options(table, table_opts.src);
  table->add_option("-m,--manifest", table_opts.manifest, "manifest.json written by search");
  table->add_option("-d,--design", table_opts.designs, "design CSV files (repeatable)");
  table->add_option("-r,--references", table_opts.references, "reference optima JSON (default: best among rows)");
  table->add_option("-u,--unconstrained", table_opts.unconstrained, "manifest of a --no-fixed search");
  table->add_option("--weights", table_opts.weights, "weight row for --design files (1-based)");
  table->add_option("--tau2", table_opts.tau2, "tau2 value for --design files (1-based)");
  table->add_option("-f,--format", table_opts.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  table->add_option("-o,--out", table_opts.out, "write here instead of stdout");

  ReferencesOptions ref_opts;
  auto* references = app.add_subcommand("references", "search each elementary criterion for reference optima");
  add_config_options(references, ref_opts.src);
  references->add_option("-o,--out", ref_opts.out, "output JSON")->capture_default_str();
  references->add_option("--seed", ref_opts.seed, "override the search seed");
  references->add_option("--restarts", ref_opts.restarts, "override the number of restarts");
  references->add_option("--threads", ref_opts.threads, "worker threads");
  references->add_flag("--no-fixed", ref_opts.no_fixed, "drop fixed runs");

  std::string preset_name;
  auto* preset = app.add_subcommand("preset", "print a shipped preset configuration");
  preset->add_option("name", preset_name, "example1 or case-study")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*search) return cmd_search(search_opts);
    if (*evaluate) return cmd_evaluate(eval_opts);
    if (*table) return cmd_table(table_opts);
    if (*references) return cmd_references(ref_opts);
    if (*preset) {
      std::cout << preset_json(preset_name).dump(2) << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ModelTooLarge& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InitializationFailed& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
