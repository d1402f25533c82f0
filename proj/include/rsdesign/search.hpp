#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "rsdesign/criteria.hpp"

namespace rsdesign {

/// A run the search must keep, placed in `block` (1-based; ignored when unblocked).
struct FixedRun {
  Point point;
  int block = 0;
};

struct SearchConfig {
  int n = 0;
  std::vector<int> block_sizes;     // empty when unblocked
  std::vector<FixedRun> fixed_runs;
  std::vector<Point> candidates;    // empty means the full grid of the factor space
  int restarts = 1;
  int max_passes = 50;
  std::uint64_t seed = 1;
  int threads = 0;                  // 0 uses the hardware concurrency
  int max_start_attempts = 1000;
  std::optional<ModelForm> form;    // defaults to blocked / intercept_excluded by layout
};

struct SearchResult {
  Design best;
  Evaluation evaluation;
  std::vector<double> restart_values;  // +inf for restarts that failed to initialise
  double seconds = 0.0;
  long accepted_exchanges = 0;
  int passes = 0;
};

/// Point-exchange search state shared read-only by all restarts: the
/// evaluator, the candidate grid with its precomputed model rows, and the run
/// layout (block of each run, fixed runs first within each block).
class ExchangeSearch {
 public:
  ExchangeSearch(const ModelSpec& spec, const CriterionConfig& criterion, const SearchConfig& config);

  const Evaluator& evaluator() const { return evaluator_; }
  const SearchConfig& config() const { return config_; }
  const std::vector<Point>& candidates() const { return candidates_; }

  /// Non-fixed runs drawn uniformly with replacement from the candidates,
  /// redrawn until the compound objective is finite. Throws InitializationFailed.
  Design random_start(std::mt19937_64& rng) const;

  /// One sweep over the non-fixed runs, applying the best strictly improving
  /// replacement for each. Returns the new design and whether anything changed.
  std::pair<Design, bool> exchange_pass(const Design& design) const;

  /// Compound objective used by the search; +inf for infeasible designs.
  double objective(const Design& design) const;

  /// Repeated passes from one start until no improvement or max_passes.
  Design local_search(Design start, long* accepted = nullptr, int* passes = nullptr) const;

 private:
  struct State;
  State state_from(const Design& design) const;
  Design design_from(const State& state) const;
  double objective(State& state) const;
  bool improve_run(State& state, int run, double& current) const;

  ModelSpec spec_;
  SearchConfig config_;
  Evaluator evaluator_;
  std::vector<Point> candidates_;
  Matrix candidate_xp_;
  Matrix candidate_xq_;
  std::vector<int> run_block_;       // per run, 0 when unblocked
  std::vector<int> fixed_candidate_; // candidate index for fixed runs, -1 otherwise
  int block_count_ = 0;
};

/// Independent restarts with per-restart seeds derived from config.seed;
/// restarts run on a thread pool and the lowest objective wins (ties to the
/// lowest restart index).
SearchResult optimize(const ModelSpec& spec, const CriterionConfig& criterion, const SearchConfig& config);

}  // namespace rsdesign
