#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rsdesign/model.hpp"

namespace rsdesign {

/// An exact design: n runs over coded levels, optionally arranged in blocks.
struct Design {
  Matrix runs;                 // n x k coded levels
  std::vector<int> blocks;     // empty when unblocked, otherwise 1..block_count per run
  int block_count = 0;         // 0 when unblocked
  std::vector<bool> fixed;     // runs the search may not alter; empty means none fixed

  int n() const { return static_cast<int>(runs.rows()); }
  int k() const { return static_cast<int>(runs.cols()); }
  bool blocked() const { return block_count > 0; }
  bool is_fixed(int run) const { return !fixed.empty() && fixed[static_cast<std::size_t>(run)]; }
  Point point(int run) const;
  /// Number of runs in each block (index 0 is block 1).
  std::vector<int> block_sizes() const;

  /// Throws ConfigError when levels fall outside the space or block indices are out of range.
  void validate(const FactorSpace& space) const;
};

/// Degrees of freedom split of the residual.
struct DofSummary {
  int t = 0;         // unique treatments
  int d = 0;         // pure error
  int lof = 0;       // lack of fit
  int residual = 0;  // n - p, or n - b - p when blocked
};

/// Integer id per run; runs share an id iff their coordinates are bitwise equal.
/// Ids are dense, assigned in order of first appearance.
std::vector<int> treatment_ids(const Design& design);

int unique_treatments(const Design& design);

/// rank[Z:T] = b + t - c, with c the number of connected components of the
/// bipartite block/treatment incidence graph. Blocks are 1-based.
int block_treatment_rank(std::span<const int> treatment, std::span<const int> blocks, int block_count);

/// The n x (b + t) indicator matrix [Z:T], for numerical cross-checks.
Matrix block_treatment_matrix(const Design& design);

/// DoF split from precomputed treatment ids. Does not throw; lof may come out
/// negative when the design has too few distinct treatments for the model.
DofSummary dof_from_treatments(std::span<const int> treatment, std::span<const int> blocks,
                               int block_count, int p);

/// Pure error and lack-of-fit degrees of freedom for the primary model of spec.
/// Throws ModelTooLarge when the residual or the lack-of-fit DoF would be negative.
DofSummary pure_error_dof(const Design& design, const ModelSpec& spec);

/// CSV with k coordinate columns, an optional `block` column and an optional
/// `fixed` 0/1 column. The header row is required.
Design read_design_csv(std::istream& in, const FactorSpace& space);
Design read_design_csv_file(const std::string& path, const FactorSpace& space);
void write_design_csv(std::ostream& out, const Design& design);
void write_design_csv_file(const std::string& path, const Design& design);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_exact(double value);

}  // namespace rsdesign
