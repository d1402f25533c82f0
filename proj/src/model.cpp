#include "rsdesign/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

namespace rsdesign {

FactorSpace::FactorSpace(std::vector<std::vector<double>> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw ConfigError("factor space needs at least one factor");
  for (std::size_t f = 0; f < levels_.size(); ++f) {
    auto& lv = levels_[f];
    for (double v : lv) {
      if (!std::isfinite(v)) {
        throw ConfigError("factor " + std::to_string(f + 1) + " has a non-finite level");
      }
    }
    std::sort(lv.begin(), lv.end());
    lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
    if (lv.size() < 2) {
      throw ConfigError("factor " + std::to_string(f + 1) + " needs at least two distinct levels");
    }
  }
}

FactorSpace FactorSpace::uniform(int k, const std::vector<double>& levels) {
  if (k < 1) throw ConfigError("factor space needs at least one factor");
  return FactorSpace(std::vector<std::vector<double>>(static_cast<std::size_t>(k), levels));
}

bool FactorSpace::contains(int factor, double value) const {
  const auto& lv = levels_.at(factor);
  return std::binary_search(lv.begin(), lv.end(), value);
}

bool Term::is_intercept() const {
  return std::all_of(exponents.begin(), exponents.end(), [](int e) { return e == 0; });
}

int Term::degree() const {
  int total = 0;
  for (int e : exponents) total += e;
  return total;
}

std::string Term::name() const {
  if (is_intercept()) return "1";
  std::string out;
  for (std::size_t f = 0; f < exponents.size(); ++f) {
    if (exponents[f] == 0) continue;
    if (!out.empty()) out += '*';
    out += 'x' + std::to_string(f + 1);
    if (exponents[f] > 1) out += '^' + std::to_string(exponents[f]);
  }
  return out;
}

Term Term::parse(const std::string& text, int k) {
  Term term{std::vector<int>(static_cast<std::size_t>(k), 0)};
  std::string cleaned;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) cleaned += c;
  }
  if (cleaned == "1") return term;
  if (cleaned.empty()) throw ConfigError("empty term");

  std::stringstream ss(cleaned);
  std::string factor;
  while (std::getline(ss, factor, '*')) {
    if (factor.size() < 2 || factor[0] != 'x') {
      throw ConfigError("cannot parse term '" + text + "'");
    }
    const auto caret = factor.find('^');
    const std::string index_text = factor.substr(1, caret == std::string::npos ? std::string::npos : caret - 1);
    char* end = nullptr;
    const long index = std::strtol(index_text.c_str(), &end, 10);
    if (index_text.empty() || *end != '\0' || index < 1 || index > k) {
      throw ConfigError("term '" + text + "' refers to an unknown factor");
    }
    long power = 1;
    if (caret != std::string::npos) {
      const std::string power_text = factor.substr(caret + 1);
      power = std::strtol(power_text.c_str(), &end, 10);
      if (power_text.empty() || *end != '\0' || power < 1) {
        throw ConfigError("term '" + text + "' has an invalid exponent");
      }
    }
    term.exponents[static_cast<std::size_t>(index - 1)] += static_cast<int>(power);
  }
  return term;
}

int ModelSpec::intercept_index() const {
  for (int j = 0; j < p(); ++j) {
    if (primary[static_cast<std::size_t>(j)].is_intercept()) return j;
  }
  return -1;
}

void ModelSpec::validate() const {
  auto check_list = [&](const std::vector<Term>& terms, const char* label) {
    std::set<Term> seen;
    for (const auto& t : terms) {
      if (static_cast<int>(t.exponents.size()) != k()) {
        throw ConfigError(std::string(label) + " term has " + std::to_string(t.exponents.size()) +
                          " exponents but the factor space has " + std::to_string(k()));
      }
      for (int e : t.exponents) {
        if (e < 0) throw ConfigError(std::string(label) + " term '" + t.name() + "' has a negative exponent");
      }
      if (!seen.insert(t).second) {
        throw ConfigError(std::string(label) + " list repeats term '" + t.name() + "'");
      }
    }
    return seen;
  };
  if (primary.empty()) throw ConfigError("primary model has no terms");
  const auto primary_set = check_list(primary, "primary");
  check_list(potential, "potential");
  for (const auto& t : potential) {
    if (primary_set.count(t)) {
      throw ConfigError("term '" + t.name() + "' appears in both primary and potential lists");
    }
  }
}

std::vector<Term> full_second_order_terms(const FactorSpace& space) {
  const int k = space.k();
  const auto zero = std::vector<int>(static_cast<std::size_t>(k), 0);
  std::vector<Term> terms;
  terms.push_back(Term{zero});
  for (int i = 0; i < k; ++i) {
    Term t{zero};
    t.exponents[i] = 1;
    terms.push_back(t);
  }
  for (int i = 0; i < k; ++i) {
    Term t{zero};
    t.exponents[i] = 2;
    terms.push_back(t);
  }
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      Term t{zero};
      t.exponents[i] = 1;
      t.exponents[j] = 1;
      terms.push_back(t);
    }
  }
  return terms;
}

std::vector<Term> third_order_potential_terms(const FactorSpace& space, bool include_pure_cubic) {
  const int k = space.k();
  const auto zero = std::vector<int>(static_cast<std::size_t>(k), 0);
  std::vector<Term> terms;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      for (int l = j + 1; l < k; ++l) {
        Term t{zero};
        t.exponents[i] = t.exponents[j] = t.exponents[l] = 1;
        terms.push_back(t);
      }
    }
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      Term t{zero};
      t.exponents[i] = 2;
      t.exponents[j] = 1;
      terms.push_back(t);
    }
  }
  if (include_pure_cubic) {
    for (int i = 0; i < k; ++i) {
      Term t{zero};
      t.exponents[i] = 3;
      terms.push_back(t);
    }
  }
  return terms;
}

std::vector<Point> candidate_set(const FactorSpace& space) {
  const int k = space.k();
  std::vector<Point> points;
  std::vector<std::size_t> idx(static_cast<std::size_t>(k), 0);
  while (true) {
    Point pt(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) pt[f] = space.levels(f)[idx[f]];
    points.push_back(std::move(pt));
    int f = k - 1;
    while (f >= 0 && ++idx[f] == space.levels(f).size()) {
      idx[f] = 0;
      --f;
    }
    if (f < 0) break;
  }
  return points;
}

namespace {

double int_power(double base, int exponent) {
  double out = 1.0;
  for (int i = 0; i < exponent; ++i) out *= base;
  return out;
}

}  // namespace

Matrix model_matrix(const Matrix& runs, const std::vector<Term>& terms) {
  Matrix x(runs.rows(), static_cast<Eigen::Index>(terms.size()));
  for (Eigen::Index i = 0; i < runs.rows(); ++i) {
    for (std::size_t j = 0; j < terms.size(); ++j) {
      double v = 1.0;
      for (Eigen::Index f = 0; f < runs.cols(); ++f) v *= int_power(runs(i, f), terms[j].exponents[f]);
      x(i, static_cast<Eigen::Index>(j)) = v;
    }
  }
  return x;
}

Vector model_row(const Point& point, const std::vector<Term>& terms) {
  Vector row(static_cast<Eigen::Index>(terms.size()));
  for (std::size_t j = 0; j < terms.size(); ++j) {
    double v = 1.0;
    for (std::size_t f = 0; f < point.size(); ++f) v *= int_power(point[f], terms[j].exponents[f]);
    row[static_cast<Eigen::Index>(j)] = v;
  }
  return row;
}

}  // namespace rsdesign
