#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "rsdesign/config.hpp"

using namespace rsdesign;
using nlohmann::json;

namespace {

std::string error_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

json minimal() {
  return json::parse(R"({
    "factors": 2, "levels": [-1, 0, 1], "runs": 9,
    "primary": "full_second_order", "potential": "third_order",
    "criterion": {"weights": [[0.5, 0.5, 0]], "tau2": [1, "1/q"]}
  })");
}

}  // namespace

TEST_CASE("example1 preset") {
  const auto cfg = parse_config(preset_json("example1"));
  CHECK(cfg.spec.k() == 5);
  CHECK(cfg.spec.p() == 21);
  CHECK(cfg.spec.q() == 30);
  CHECK(cfg.n == 40);
  CHECK_FALSE(cfg.blocked());
  CHECK(cfg.form == ModelForm::intercept_excluded);
  REQUIRE(cfg.tau2.size() == 1);
  CHECK(cfg.tau2[0] == doctest::Approx(1.0 / 30));
  CHECK(cfg.weights[0] == std::array<double, 3>{1, 0, 0});
  const auto crit = cfg.objective(0, 0);
  CHECK(crit.estimator == Estimator::point_prior);
  CHECK(cfg.reporting(0, 0).estimator == Estimator::mc);
}

TEST_CASE("case-study preset") {
  const auto cfg = parse_config(preset_json("case-study"));
  CHECK(cfg.spec.k() == 3);
  CHECK(cfg.spec.p() == 9);
  CHECK(cfg.spec.intercept_index() == -1);
  CHECK(cfg.spec.q() == 10);
  CHECK(cfg.n == 36);
  CHECK(cfg.block_sizes == std::vector<int>{18, 18});
  CHECK(cfg.form == ModelForm::blocked);
  CHECK(cfg.fixed_runs.size() == 4);
  CHECK(cfg.spec.space.levels(0).size() == 5);
  CHECK(cfg.weights.size() == 6);
  CHECK(cfg.weights[0][0] == doctest::Approx(1.0 / 3));
  CHECK(cfg.tau2 == std::vector<double>{1.0, 0.1});
  CHECK(cfg.mc_samples == std::vector<int>{500, 1000});
  CHECK(cfg.objective(2, 1).mc_samples == 1000);
  const auto s = cfg.search();
  CHECK(s.block_sizes == cfg.block_sizes);
  CHECK(s.fixed_runs.size() == 4);
}

TEST_CASE("shipped preset files match the embedded presets") {
  for (const auto& name : preset_names()) {
    std::ifstream in(std::string(RSDESIGN_SOURCE_DIR) + "/presets/" + name + ".json");
    REQUIRE(in.good());
    CHECK(json::parse(in) == preset_json(name));
  }
  CHECK_THROWS_AS(preset_json("nope"), ConfigError);
}

TEST_CASE("fractions") {
  CHECK(parse_fraction("1/3") == doctest::Approx(1.0 / 3));
  CHECK(parse_fraction(0.25) == 0.25);
  CHECK(parse_fraction("1/q", 10) == 0.1);
  CHECK(parse_fraction("q", 10) == 10.0);
  CHECK_THROWS_AS(parse_fraction("1/0"), ConfigError);
  CHECK_THROWS_AS(parse_fraction("abc"), ConfigError);
  CHECK_THROWS_AS(parse_fraction("1/q"), ConfigError);
  CHECK_THROWS_AS(parse_fraction(json::array()), ConfigError);
}

TEST_CASE("explicit term lists") {
  auto doc = minimal();
  doc["primary"] = {"1", "x1", "x2", "x1*x2", {0, 2}};
  doc["potential"] = {"x1^2*x2"};
  const auto cfg = parse_config(doc);
  CHECK(cfg.spec.p() == 5);
  CHECK(cfg.spec.primary[4].name() == "x2^2");
  CHECK(cfg.spec.q() == 1);
}

TEST_CASE("weights must sum to one") {
  auto doc = minimal();
  doc["criterion"]["weights"] = {{0.5, 0.4, 0.0}};
  const auto msg = error_of(doc);
  CHECK(msg.find("criterion.weights[0]") != std::string::npos);
  CHECK(msg.find("sum to 1") != std::string::npos);
}

TEST_CASE("every problem is reported with its path") {
  auto doc = minimal();
  doc["runs"] = 0;
  doc["criterion"]["tau2"] = {-1};
  doc["criterion"]["alpha"] = {{"dp", 2}};
  doc["search"] = {{"restarts", 0}, {"colour", "blue"}};
  doc["bogus"] = 1;
  const auto msg = error_of(doc);
  for (const char* path : {"runs:", "criterion.tau2:", "criterion.alpha:", "search.restarts:", "search.colour:", "bogus:"}) {
    CHECK_MESSAGE(msg.find(path) != std::string::npos, path);
  }
}

TEST_CASE("layout errors") {
  auto doc = minimal();
  doc["blocks"] = {4, 4};
  CHECK(error_of(doc).find("blocks:") != std::string::npos);

  doc = minimal();
  doc["fixed_runs"] = {{{"point", {0, 0.5}}}};
  CHECK(error_of(doc).find("fixed_runs[0].point") != std::string::npos);

  doc = minimal();
  doc["blocks"] = {4, 5};
  doc["fixed_runs"] = {{{"point", {0, 0}}, {"block", 3}}};
  CHECK(error_of(doc).find("fixed_runs[0].block") != std::string::npos);

  doc = minimal();
  doc["primary"] = {"x1", "x2"};
  CHECK(error_of(doc).find("intercept") != std::string::npos);

  doc = minimal();
  doc["potential"] = json::array();
  CHECK(error_of(doc).find("potential") != std::string::npos);

  doc = minimal();
  doc.erase("levels");
  CHECK(error_of(doc).find("levels:") != std::string::npos);
}

TEST_CASE("blocked configs drop the intercept automatically") {
  auto doc = minimal();
  doc["runs"] = 12;
  doc["blocks"] = {6, 6};
  const auto cfg = parse_config(doc);
  CHECK(cfg.spec.p() == 5);
  CHECK(cfg.spec.intercept_index() == -1);
  CHECK(cfg.form == ModelForm::blocked);
}

TEST_CASE("per-tau2 sample sizes must line up") {
  auto doc = minimal();
  doc["criterion"]["estimator"] = "mc";
  doc["criterion"]["mc_samples"] = {100};
  CHECK(error_of(doc).find("criterion.mc_samples") != std::string::npos);
  doc["criterion"]["mc_samples"] = 100;
  const auto cfg = parse_config(doc);
  CHECK(cfg.mc_samples == std::vector<int>{100, 100});
}

TEST_CASE("config files") {
  CHECK_THROWS_AS(load_config_file("/nonexistent/config.json"), ConfigError);
  const std::string path = "test_config_tmp.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_config_file(path), ConfigError);
  {
    std::ofstream out(path);
    out << minimal().dump(2);
  }
  CHECK(load_config_file(path).n == 9);
}
