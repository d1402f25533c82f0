#pragma once

#include <compare>
#include <string>
#include <vector>

#include "rsdesign/numerics.hpp"

namespace rsdesign {

/// Coded levels available for each of the k treatment factors.
class FactorSpace {
 public:
  explicit FactorSpace(std::vector<std::vector<double>> levels);

  /// k factors sharing the same level list.
  static FactorSpace uniform(int k, const std::vector<double>& levels);

  int k() const { return static_cast<int>(levels_.size()); }
  const std::vector<double>& levels(int factor) const { return levels_.at(factor); }
  const std::vector<std::vector<double>>& all_levels() const { return levels_; }
  bool contains(int factor, double value) const;

 private:
  std::vector<std::vector<double>> levels_;
};

/// A monomial in the coded factors, identified by its exponent vector.
struct Term {
  std::vector<int> exponents;

  bool is_intercept() const;
  int degree() const;
  /// "1", "x1", "x2^2", "x1*x3", "x1^2*x2".
  std::string name() const;
  /// Inverse of name(); k fixes the exponent vector length.
  static Term parse(const std::string& text, int k);

  auto operator<=>(const Term&) const = default;
};

struct ModelSpec {
  FactorSpace space;
  std::vector<Term> primary;
  std::vector<Term> potential;

  int k() const { return space.k(); }
  int p() const { return static_cast<int>(primary.size()); }
  int q() const { return static_cast<int>(potential.size()); }
  /// Column of the intercept in the primary list, or -1.
  int intercept_index() const;

  /// Throws ConfigError on duplicate terms, overlapping lists or wrong arity.
  void validate() const;
};

using Point = std::vector<double>;

/// Intercept, linear, pure quadratic, then bilinear terms in lexicographic pair order.
std::vector<Term> full_second_order_terms(const FactorSpace& space);

/// Triple-linear terms, quadratic-by-linear terms, then (optionally) pure cubics.
std::vector<Term> third_order_potential_terms(const FactorSpace& space, bool include_pure_cubic);

/// Full factorial grid over the factor levels in lexicographic order (last factor fastest).
std::vector<Point> candidate_set(const FactorSpace& space);

/// Model matrix with one row per run (runs is n x k) and one column per term.
Matrix model_matrix(const Matrix& runs, const std::vector<Term>& terms);

/// Single row of the model matrix for one point.
Vector model_row(const Point& point, const std::vector<Term>& terms);

}  // namespace rsdesign
