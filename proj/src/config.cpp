#include "rsdesign/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace rsdesign {

namespace {

// Five factors at three levels, 40 runs, full quadratic primary model and the
// 30 third-order interaction terms as potential contamination.
constexpr const char* kExample1 = R"({
  "name": "example1",
  "factors": 5,
  "levels": [-1, 0, 1],
  "runs": 40,
  "primary": "full_second_order",
  "potential": "third_order",
  "criterion": {
    "family": "determinant",
    "weights": [[1, 0, 0]],
    "tau2": ["1/q"],
    "alpha": {"dp": 0.05, "lp": 0.05, "lof": 0.05},
    "estimator": "point_prior",
    "seed": 20240501
  },
  "report": {"estimator": "mc", "mc_samples": 1000},
  "search": {"restarts": 20, "max_passes": 50, "seed": 1}
})";

// Three dosage factors searched over a 5-level grid in two blocks of 18, with
// two centre points fixed in each block. The 5 coded levels are an assumption:
// only the 3 levels that survive in the optimal designs are known.
constexpr const char* kCaseStudy = R"({
  "name": "case-study",
  "factors": 3,
  "levels": [-1, -0.5, 0, 0.5, 1],
  "runs": 36,
  "blocks": [18, 18],
  "primary": "full_second_order",
  "potential": "third_order_cubic",
  "fixed_runs": [
    {"point": [0, 0, 0], "block": 1},
    {"point": [0, 0, 0], "block": 1},
    {"point": [0, 0, 0], "block": 2},
    {"point": [0, 0, 0], "block": 2}
  ],
  "criterion": {
    "family": "determinant",
    "weights": [["1/3", "1/3", "1/3"], [0.4, 0.2, 0.4], [0.25, 0.25, 0.5], [1, 0, 0], [0, 1, 0], [0, 0, 1]],
    "tau2": [1, "1/q"],
    "alpha": {"dp": 0.05, "lp": 0.05, "lof": 0.05},
    "estimator": "mc",
    "mc_samples": [500, 1000],
    "seed": 20240501
  },
  "report": {"estimator": "mc", "mc_samples": [500, 1000]},
  "search": {"restarts": 50, "max_passes": 50, "seed": 1}
})";

class Issues {
 public:
  void add(const std::string& path, const std::string& message) { lines_.push_back(path + ": " + message); }
  bool empty() const { return lines_.empty(); }
  [[noreturn]] void raise() const {
    std::string msg = "invalid configuration";
    for (const auto& l : lines_) msg += "\n  " + l;
    throw ConfigError(msg);
  }

 private:
  std::vector<std::string> lines_;
};

void check_keys(const nlohmann::json& obj, const std::string& path, const std::set<std::string>& allowed,
                Issues& issues) {
  if (!obj.is_object()) return;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) issues.add(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
  }
}

template <typename F>
void guarded(Issues& issues, const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    issues.add(path, e.what());
  } catch (const nlohmann::json::exception& e) {
    issues.add(path, std::string("wrong type (") + e.what() + ")");
  }
}

std::vector<Term> parse_term_list(const nlohmann::json& j, int k) {
  std::vector<Term> out;
  if (!j.is_array()) throw ConfigError("expected a preset name or a list of terms");
  for (const auto& t : j) {
    if (t.is_string()) {
      out.push_back(Term::parse(t.get<std::string>(), k));
    } else if (t.is_array()) {
      Term term{t.get<std::vector<int>>()};
      if (static_cast<int>(term.exponents.size()) != k) throw ConfigError("exponent vector length must equal the factor count");
      out.push_back(std::move(term));
    } else {
      throw ConfigError("terms are strings like \"x1^2*x2\" or exponent arrays");
    }
  }
  return out;
}

std::vector<int> per_tau2_counts(const nlohmann::json& j, std::size_t tau2_count) {
  std::vector<int> out;
  if (j.is_number_integer()) {
    out.assign(tau2_count, j.get<int>());
  } else if (j.is_array()) {
    out = j.get<std::vector<int>>();
    if (out.size() != tau2_count) throw ConfigError("needs one entry per tau2 value");
  } else {
    throw ConfigError("expected an integer or a list of integers");
  }
  for (int v : out) {
    if (v < 1) throw ConfigError("sample sizes must be at least 1");
  }
  return out;
}

Estimator parse_estimator(const nlohmann::json& j) {
  const auto s = j.get<std::string>();
  if (s == "mc") return Estimator::mc;
  if (s == "point_prior") return Estimator::point_prior;
  throw ConfigError("estimator must be \"mc\" or \"point_prior\"");
}

}  // namespace

double parse_fraction(const nlohmann::json& value, int q) {
  if (value.is_number()) return value.get<double>();
  if (!value.is_string()) throw ConfigError("expected a number or a fraction string");
  const auto s = value.get<std::string>();
  if (s == "q" || s == "1/q") {
    if (q < 1) throw ConfigError("'" + s + "' needs at least one potential term");
    return s == "q" ? q : 1.0 / q;
  }
  const auto slash = s.find('/');
  auto parse_real = [&](const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || *end != '\0') throw ConfigError("cannot parse '" + s + "' as a number");
    return v;
  };
  if (slash == std::string::npos) return parse_real(s);
  const double den = parse_real(s.substr(slash + 1));
  if (den == 0.0) throw ConfigError("zero denominator in '" + s + "'");
  return parse_real(s.substr(0, slash)) / den;
}

CriterionConfig ExperimentConfig::objective(std::size_t weights_index, std::size_t tau2_index) const {
  CriterionConfig c = base;
  c.weights = weights.at(weights_index);
  c.tau2 = tau2.at(tau2_index);
  c.mc_samples = mc_samples.at(tau2_index);
  return c;
}

CriterionConfig ExperimentConfig::reporting(std::size_t weights_index, std::size_t tau2_index) const {
  CriterionConfig c = objective(weights_index, tau2_index);
  c.estimator = report_estimator;
  c.mc_samples = report_mc_samples.at(tau2_index);
  return c;
}

SearchConfig ExperimentConfig::search() const {
  SearchConfig s;
  s.n = n;
  s.block_sizes = block_sizes;
  s.fixed_runs = fixed_runs;
  s.restarts = restarts;
  s.max_passes = max_passes;
  s.seed = search_seed;
  s.threads = threads;
  s.form = form;
  return s;
}

ExperimentConfig parse_config(const nlohmann::json& doc) {
  Issues issues;
  ExperimentConfig cfg;
  cfg.source = doc;
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  check_keys(doc, "",
             {"name", "factors", "levels", "runs", "blocks", "primary", "potential", "fixed_runs", "criterion",
              "report", "search"},
             issues);
  cfg.name = doc.value("name", std::string("experiment"));

  // Factor space.
  std::optional<FactorSpace> space;
  guarded(issues, "levels", [&] {
    if (!doc.contains("levels")) throw ConfigError("required");
    const auto& lv = doc["levels"];
    if (lv.is_array() && !lv.empty() && lv[0].is_array()) {
      std::vector<std::vector<double>> per;
      for (const auto& f : lv) {
        std::vector<double> levels;
        for (const auto& v : f) levels.push_back(parse_fraction(v));
        per.push_back(std::move(levels));
      }
      if (doc.contains("factors") && doc["factors"].get<int>() != static_cast<int>(per.size())) {
        throw ConfigError("per-factor level lists disagree with 'factors'");
      }
      space.emplace(std::move(per));
    } else {
      if (!doc.contains("factors")) throw ConfigError("'factors' is required with a shared level list");
      std::vector<double> levels;
      for (const auto& v : lv) levels.push_back(parse_fraction(v));
      space.emplace(FactorSpace::uniform(doc["factors"].get<int>(), levels));
    }
  });

  guarded(issues, "runs", [&] {
    cfg.n = doc.at("runs").get<int>();
    if (cfg.n < 1) throw ConfigError("must be at least 1");
  });

  guarded(issues, "blocks", [&] {
    if (!doc.contains("blocks")) return;
    cfg.block_sizes = doc["blocks"].get<std::vector<int>>();
    if (cfg.block_sizes.empty()) throw ConfigError("list at least one block size or omit the field");
    int total = 0;
    for (int s : cfg.block_sizes) {
      if (s < 1) throw ConfigError("block sizes must be positive");
      total += s;
    }
    if (cfg.n > 0 && total != cfg.n) throw ConfigError("block sizes sum to " + std::to_string(total) + ", not runs = " + std::to_string(cfg.n));
  });

  if (space) {
    const int k = space->k();
    cfg.spec = ModelSpec{*space, {}, {}};
    guarded(issues, "primary", [&] {
      const auto& j = doc.at("primary");
      if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name != "full_second_order") throw ConfigError("unknown preset '" + name + "'");
        cfg.spec.primary = full_second_order_terms(*space);
        // Block effects absorb the intercept.
        if (!cfg.block_sizes.empty()) cfg.spec.primary.erase(cfg.spec.primary.begin());
      } else {
        cfg.spec.primary = parse_term_list(j, k);
      }
    });
    guarded(issues, "potential", [&] {
      const auto& j = doc.at("potential");
      if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "third_order") {
          cfg.spec.potential = third_order_potential_terms(*space, false);
        } else if (name == "third_order_cubic") {
          cfg.spec.potential = third_order_potential_terms(*space, true);
        } else {
          throw ConfigError("unknown preset '" + name + "'");
        }
      } else {
        cfg.spec.potential = parse_term_list(j, k);
      }
    });
    guarded(issues, "primary/potential", [&] {
      if (!cfg.spec.primary.empty()) cfg.spec.validate();
    });

    guarded(issues, "fixed_runs", [&] {
      if (!doc.contains("fixed_runs")) return;
      int idx = 0;
      for (const auto& fr : doc["fixed_runs"]) {
        const std::string path = "fixed_runs[" + std::to_string(idx++) + "]";
        FixedRun run;
        for (const auto& v : fr.at("point")) run.point.push_back(parse_fraction(v));
        if (static_cast<int>(run.point.size()) != k) {
          issues.add(path + ".point", "needs " + std::to_string(k) + " coordinates");
          continue;
        }
        bool inside = true;
        for (int f = 0; f < k; ++f) inside = inside && space->contains(f, run.point[f]);
        if (!inside) issues.add(path + ".point", "not a point of the factor space");
        run.block = fr.value("block", 0);
        if (!cfg.block_sizes.empty() && (run.block < 1 || run.block > static_cast<int>(cfg.block_sizes.size()))) {
          issues.add(path + ".block", "must name a block between 1 and " + std::to_string(cfg.block_sizes.size()));
        }
        cfg.fixed_runs.push_back(std::move(run));
      }
    });
  }

  cfg.form = cfg.block_sizes.empty() ? ModelForm::intercept_excluded : ModelForm::blocked;

  // Criterion.
  const auto crit = doc.value("criterion", nlohmann::json::object());
  check_keys(crit, "criterion",
             {"family", "weights", "tau2", "alpha", "W", "lof_weights", "estimator", "mc_samples", "seed", "form"},
             issues);
  const int q = cfg.spec.q();
  guarded(issues, "criterion.family", [&] {
    const auto family = crit.value("family", std::string("determinant"));
    if (family == "determinant") {
      cfg.base.family = CriterionFamily::determinant;
    } else if (family == "trace") {
      cfg.base.family = CriterionFamily::trace;
    } else {
      throw ConfigError("must be \"determinant\" or \"trace\"");
    }
  });
  guarded(issues, "criterion.form", [&] {
    if (!crit.contains("form")) return;
    const auto form = crit["form"].get<std::string>();
    if (!cfg.block_sizes.empty()) throw ConfigError("blocked experiments always use the blocked form");
    if (form == "full") {
      cfg.form = ModelForm::full;
    } else if (form != "intercept_excluded") {
      throw ConfigError("must be \"full\" or \"intercept_excluded\"");
    }
  });
  guarded(issues, "criterion.weights", [&] {
    const auto& w = crit.contains("weights") ? crit["weights"] : nlohmann::json::array({{1, 0, 0}});
    if (!w.is_array() || w.empty()) throw ConfigError("needs at least one weight combination");
    const auto rows = w[0].is_array() ? w : nlohmann::json::array({w});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string path = "criterion.weights[" + std::to_string(i) + "]";
      if (!rows[i].is_array() || rows[i].size() != 3) {
        issues.add(path, "needs exactly three weights (inference, lack of fit, MSE)");
        continue;
      }
      std::array<double, 3> kappa{};
      double sum = 0.0;
      bool ok = true;
      for (std::size_t c = 0; c < 3; ++c) {
        try {
          kappa[c] = parse_fraction(rows[i][c]);
        } catch (const ConfigError& e) {
          issues.add(path, e.what());
          ok = false;
        }
        if (ok && !(kappa[c] >= 0.0)) {
          issues.add(path, "weights must be non-negative");
          ok = false;
        }
        sum += kappa[c];
      }
      if (ok && std::fabs(sum - 1.0) > 1e-12) {
        issues.add(path, "weights must sum to 1 (they sum to " + std::to_string(sum) + ")");
        ok = false;
      }
      if (ok) cfg.weights.push_back(kappa);
    }
  });
  guarded(issues, "criterion.tau2", [&] {
    const auto& t = crit.contains("tau2") ? crit["tau2"] : nlohmann::json::array({1});
    const auto values = t.is_array() ? t : nlohmann::json::array({t});
    if (values.empty()) throw ConfigError("needs at least one value");
    for (const auto& v : values) {
      const double tau2 = parse_fraction(v, q);
      if (!(tau2 > 0.0) || !std::isfinite(tau2)) throw ConfigError("values must be positive and finite");
      cfg.tau2.push_back(tau2);
    }
  });
  guarded(issues, "criterion.alpha", [&] {
    if (!crit.contains("alpha")) return;
    const auto& a = crit["alpha"];
    check_keys(a, "criterion.alpha", {"dp", "lp", "lof"}, issues);
    cfg.base.alpha_dp = a.contains("dp") ? parse_fraction(a["dp"]) : cfg.base.alpha_dp;
    cfg.base.alpha_lp = a.contains("lp") ? parse_fraction(a["lp"]) : cfg.base.alpha_lp;
    cfg.base.alpha_lof = a.contains("lof") ? parse_fraction(a["lof"]) : cfg.base.alpha_lof;
    for (double v : {cfg.base.alpha_dp, cfg.base.alpha_lp, cfg.base.alpha_lof}) {
      if (!(v > 0.0 && v < 1.0)) throw ConfigError("levels must lie in (0, 1)");
    }
  });
  guarded(issues, "criterion.W", [&] {
    if (!crit.contains("W")) return;
    cfg.base.inference_weights = crit["W"].get<std::vector<double>>();
    const int expected = cfg.form == ModelForm::intercept_excluded ? cfg.spec.p() - 1 : cfg.spec.p();
    if (static_cast<int>(cfg.base.inference_weights.size()) != expected) {
      throw ConfigError("needs " + std::to_string(expected) + " entries");
    }
  });
  guarded(issues, "criterion.lof_weights", [&] {
    if (!crit.contains("lof_weights")) return;
    cfg.base.lof_weights = crit["lof_weights"].get<std::vector<double>>();
    if (static_cast<int>(cfg.base.lof_weights.size()) != q) throw ConfigError("needs " + std::to_string(q) + " entries");
  });
  guarded(issues, "criterion.estimator", [&] {
    if (crit.contains("estimator")) cfg.base.estimator = parse_estimator(crit["estimator"]);
  });
  guarded(issues, "criterion.mc_samples", [&] {
    cfg.mc_samples = per_tau2_counts(crit.value("mc_samples", nlohmann::json(1000)), cfg.tau2.size());
  });
  guarded(issues, "criterion.seed", [&] { cfg.base.seed = crit.value("seed", std::uint64_t{1}); });

  const auto rep = doc.value("report", nlohmann::json::object());
  check_keys(rep, "report", {"estimator", "mc_samples"}, issues);
  guarded(issues, "report.estimator", [&] {
    cfg.report_estimator = rep.contains("estimator") ? parse_estimator(rep["estimator"]) : Estimator::mc;
  });
  guarded(issues, "report.mc_samples", [&] {
    cfg.report_mc_samples = rep.contains("mc_samples") ? per_tau2_counts(rep["mc_samples"], cfg.tau2.size())
                                                       : cfg.mc_samples;
  });

  const auto search = doc.value("search", nlohmann::json::object());
  check_keys(search, "search", {"restarts", "max_passes", "seed", "threads"}, issues);
  guarded(issues, "search.restarts", [&] {
    cfg.restarts = search.value("restarts", 1);
    if (cfg.restarts < 1) throw ConfigError("must be at least 1");
  });
  guarded(issues, "search.max_passes", [&] {
    cfg.max_passes = search.value("max_passes", 50);
    if (cfg.max_passes < 1) throw ConfigError("must be at least 1");
  });
  guarded(issues, "search.seed", [&] { cfg.search_seed = search.value("seed", std::uint64_t{1}); });
  guarded(issues, "search.threads", [&] {
    cfg.threads = search.value("threads", 0);
    if (cfg.threads < 0) throw ConfigError("must be non-negative");
  });

  if (space && issues.empty()) {
    guarded(issues, "primary", [&] {
      if (cfg.form == ModelForm::blocked && cfg.spec.intercept_index() >= 0) {
        throw ConfigError("blocked experiments must not list the intercept");
      }
      if (cfg.form == ModelForm::intercept_excluded && cfg.spec.intercept_index() < 0) {
        throw ConfigError("the primary model needs an intercept");
      }
    });
    guarded(issues, "potential", [&] {
      bool needs_q = false;
      for (const auto& w : cfg.weights) needs_q = needs_q || w[kLackOfFit] > 0.0;
      if (needs_q && q == 0) throw ConfigError("lack-of-fit weights need at least one potential term");
    });
  }
  if (!issues.empty()) issues.raise();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("configuration file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

std::vector<std::string> preset_names() { return {"example1", "case-study"}; }

nlohmann::json preset_json(const std::string& name) {
  if (name == "example1") return nlohmann::json::parse(kExample1);
  if (name == "case-study") return nlohmann::json::parse(kCaseStudy);
  throw ConfigError("unknown preset '" + name + "' (available: example1, case-study)");
}

}  // namespace rsdesign
