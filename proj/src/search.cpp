#include "rsdesign/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <map>
#include <thread>

namespace rsdesign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kImprovementThreshold = 1e-12;

std::uint64_t restart_seed(std::uint64_t base, int restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(restart)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

struct ExchangeSearch::State {
  std::vector<int> candidate;  // candidate index per run
  Matrix xp;
  Matrix xq;
};

ExchangeSearch::ExchangeSearch(const ModelSpec& spec, const CriterionConfig& criterion, const SearchConfig& config)
    : spec_(spec),
      config_(config),
      evaluator_(spec, criterion,
                 config.form.value_or(config.block_sizes.empty() ? ModelForm::intercept_excluded
                                                                 : ModelForm::blocked)) {
  if (config_.n < 1) throw ConfigError("search.n: must be at least 1");
  if (config_.restarts < 1) throw ConfigError("search.restarts: must be at least 1");
  if (config_.max_passes < 1) throw ConfigError("search.max_passes: must be at least 1");

  // Candidate grid, deduplicated with exact comparison, order preserved.
  const auto raw = config_.candidates.empty() ? candidate_set(spec_.space) : config_.candidates;
  std::map<Point, int> index;
  for (const auto& pt : raw) {
    if (static_cast<int>(pt.size()) != spec_.k()) throw ConfigError("search.candidates: wrong point dimension");
    for (int f = 0; f < spec_.k(); ++f) {
      if (!spec_.space.contains(f, pt[f])) throw ConfigError("search.candidates: point outside the factor space");
    }
    if (index.emplace(pt, static_cast<int>(candidates_.size())).second) candidates_.push_back(pt);
  }
  if (candidates_.empty()) throw ConfigError("search.candidates: candidate set is empty");

  Matrix grid(static_cast<Eigen::Index>(candidates_.size()), spec_.k());
  for (std::size_t c = 0; c < candidates_.size(); ++c) {
    for (int f = 0; f < spec_.k(); ++f) grid(static_cast<Eigen::Index>(c), f) = candidates_[c][f];
  }
  candidate_xp_ = model_matrix(grid, spec_.primary);
  candidate_xq_ = model_matrix(grid, spec_.potential);

  // Run layout: block by block, fixed runs first within each block.
  const bool blocked = !config_.block_sizes.empty();
  block_count_ = static_cast<int>(config_.block_sizes.size());
  std::vector<int> sizes = blocked ? config_.block_sizes : std::vector<int>{config_.n};
  int total = 0;
  for (int s : sizes) {
    if (s < 1) throw ConfigError("search.blocks: every block needs at least one run");
    total += s;
  }
  if (total != config_.n) throw ConfigError("search.blocks: block sizes must sum to n");

  std::vector<std::vector<int>> fixed_per_block(sizes.size());
  for (const auto& fr : config_.fixed_runs) {
    const int blk = blocked ? fr.block : 1;
    if (blk < 1 || blk > static_cast<int>(sizes.size())) throw ConfigError("fixed_runs: block index out of range");
    auto it = index.find(fr.point);
    if (it == index.end()) throw ConfigError("fixed_runs: point is not in the candidate set");
    fixed_per_block[static_cast<std::size_t>(blk - 1)].push_back(it->second);
  }
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    if (static_cast<int>(fixed_per_block[b].size()) > sizes[b]) {
      throw ConfigError("fixed_runs: block " + std::to_string(b + 1) + " has more fixed runs than runs");
    }
    for (int i = 0; i < sizes[b]; ++i) {
      run_block_.push_back(blocked ? static_cast<int>(b) + 1 : 0);
      fixed_candidate_.push_back(i < static_cast<int>(fixed_per_block[b].size()) ? fixed_per_block[b][static_cast<std::size_t>(i)] : -1);
    }
  }
}

Design ExchangeSearch::design_from(const State& state) const {
  Design d;
  d.runs.resize(config_.n, spec_.k());
  for (int i = 0; i < config_.n; ++i) {
    const auto& pt = candidates_[static_cast<std::size_t>(state.candidate[static_cast<std::size_t>(i)])];
    for (int f = 0; f < spec_.k(); ++f) d.runs(i, f) = pt[f];
  }
  if (block_count_ > 0) {
    d.blocks = run_block_;
    d.block_count = block_count_;
  }
  d.fixed.resize(static_cast<std::size_t>(config_.n));
  bool any_fixed = false;
  for (int i = 0; i < config_.n; ++i) {
    d.fixed[static_cast<std::size_t>(i)] = fixed_candidate_[static_cast<std::size_t>(i)] >= 0;
    any_fixed = any_fixed || d.fixed[static_cast<std::size_t>(i)];
  }
  if (!any_fixed) d.fixed.clear();
  return d;
}

ExchangeSearch::State ExchangeSearch::state_from(const Design& design) const {
  if (design.n() != config_.n || design.k() != spec_.k()) throw ConfigError("design does not match the search layout");
  std::map<Point, int> index;
  for (std::size_t c = 0; c < candidates_.size(); ++c) index.emplace(candidates_[c], static_cast<int>(c));
  State s;
  s.candidate.resize(static_cast<std::size_t>(config_.n));
  s.xp.resize(config_.n, spec_.p());
  s.xq.resize(config_.n, spec_.q());
  for (int i = 0; i < config_.n; ++i) {
    auto it = index.find(design.point(i));
    if (it == index.end()) throw ConfigError("design run " + std::to_string(i + 1) + " is not a candidate point");
    s.candidate[static_cast<std::size_t>(i)] = it->second;
    s.xp.row(i) = candidate_xp_.row(it->second);
    s.xq.row(i) = candidate_xq_.row(it->second);
  }
  return s;
}

double ExchangeSearch::objective(State& state) const {
  try {
    return evaluator_
        .evaluate(state.xp, state.xq, state.candidate, run_block_, block_count_, /*all_components=*/false)
        .compound_log;
  } catch (const SingularInformation&) {
    return kInf;
  } catch (const NotPositiveDefinite&) {
    return kInf;
  }
}

double ExchangeSearch::objective(const Design& design) const {
  State s = state_from(design);
  return objective(s);
}

Design ExchangeSearch::random_start(std::mt19937_64& rng) const {
  const int min_runs = spec_.p() + block_count_;
  if (config_.n < min_runs) {
    throw InitializationFailed("n = " + std::to_string(config_.n) + " runs cannot support " +
                               std::to_string(spec_.p()) + " primary terms" +
                               (block_count_ ? " and " + std::to_string(block_count_) + " blocks" : ""));
  }
  std::uniform_int_distribution<int> pick(0, static_cast<int>(candidates_.size()) - 1);
  State s;
  s.candidate.resize(static_cast<std::size_t>(config_.n));
  s.xp.resize(config_.n, spec_.p());
  s.xq.resize(config_.n, spec_.q());
  for (int attempt = 0; attempt < config_.max_start_attempts; ++attempt) {
    for (int i = 0; i < config_.n; ++i) {
      const int fixed = fixed_candidate_[static_cast<std::size_t>(i)];
      const int c = fixed >= 0 ? fixed : pick(rng);
      s.candidate[static_cast<std::size_t>(i)] = c;
      s.xp.row(i) = candidate_xp_.row(c);
      s.xq.row(i) = candidate_xq_.row(c);
    }
    if (std::isfinite(objective(s))) return design_from(s);
  }
  throw InitializationFailed("no feasible random start after " + std::to_string(config_.max_start_attempts) +
                             " attempts");
}

bool ExchangeSearch::improve_run(State& state, int run, double& current) const {
  const int original = state.candidate[static_cast<std::size_t>(run)];
  int best = original;
  double best_value = current;
  for (int c = 0; c < static_cast<int>(candidates_.size()); ++c) {
    if (c == original) continue;
    state.candidate[static_cast<std::size_t>(run)] = c;
    state.xp.row(run) = candidate_xp_.row(c);
    state.xq.row(run) = candidate_xq_.row(c);
    const double v = objective(state);
    if (v < best_value - kImprovementThreshold) {
      best_value = v;
      best = c;
    }
  }
  state.candidate[static_cast<std::size_t>(run)] = best;
  state.xp.row(run) = candidate_xp_.row(best);
  state.xq.row(run) = candidate_xq_.row(best);
  if (best == original) return false;
  current = best_value;
  return true;
}

std::pair<Design, bool> ExchangeSearch::exchange_pass(const Design& design) const {
  State s = state_from(design);
  double current = objective(s);
  bool improved = false;
  for (int i = 0; i < config_.n; ++i) {
    if (fixed_candidate_[static_cast<std::size_t>(i)] >= 0) continue;
    improved = improve_run(s, i, current) || improved;
  }
  return {design_from(s), improved};
}

Design ExchangeSearch::local_search(Design start, long* accepted, int* passes) const {
  State s = state_from(start);
  double current = objective(s);
  long count = 0;
  int pass = 0;
  for (; pass < config_.max_passes; ++pass) {
    bool improved = false;
    for (int i = 0; i < config_.n; ++i) {
      if (fixed_candidate_[static_cast<std::size_t>(i)] >= 0) continue;
      if (improve_run(s, i, current)) {
        improved = true;
        ++count;
      }
    }
    if (!improved) {
      ++pass;
      break;
    }
  }
  if (accepted) *accepted += count;
  if (passes) *passes += pass;
  return design_from(s);
}

SearchResult optimize(const ModelSpec& spec, const CriterionConfig& criterion, const SearchConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  const ExchangeSearch search(spec, criterion, config);

  struct RestartOutcome {
    std::optional<Design> design;
    double value = kInf;
    long accepted = 0;
    int passes = 0;
    std::string error;
  };
  std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(config.restarts));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next.fetch_add(1); r < config.restarts; r = next.fetch_add(1)) {
      auto& out = outcomes[static_cast<std::size_t>(r)];
      try {
        std::mt19937_64 rng(restart_seed(config.seed, r));
        Design local = search.local_search(search.random_start(rng), &out.accepted, &out.passes);
        out.value = search.objective(local);
        out.design = std::move(local);
      } catch (const InitializationFailed& e) {
        out.error = e.what();
      }
    }
  };

  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, config.restarts);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SearchResult result;
  int best = -1;
  for (int r = 0; r < config.restarts; ++r) {
    const auto& out = outcomes[static_cast<std::size_t>(r)];
    result.restart_values.push_back(out.value);
    result.accepted_exchanges += out.accepted;
    result.passes += out.passes;
    if (out.design && (best < 0 || out.value < outcomes[static_cast<std::size_t>(best)].value)) best = r;
  }
  if (best < 0) {
    throw InitializationFailed("every restart failed to initialise: " + outcomes.front().error);
  }
  result.best = *outcomes[static_cast<std::size_t>(best)].design;
  result.evaluation = search.evaluator().evaluate(result.best, /*all_components=*/true);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace rsdesign
