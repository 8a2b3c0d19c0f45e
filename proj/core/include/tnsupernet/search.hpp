#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tnsupernet/checkpoint.hpp"
#include "tnsupernet/tn_distribution.hpp"

namespace tnsupernet {

enum class SearchMode { kStochastic, kDeterministic };
enum class OptimizerKind { kPlainGradient, kAdaptiveMoments };

struct SearchConfig {
  SearchMode mode = SearchMode::kStochastic;
  std::size_t iterations = 300;
  std::size_t samples_per_step = 4;
  /// Unset means the mode default: 0.05 stochastic, 0.01 deterministic.
  std::optional<double> learning_rate;
  OptimizerKind optimizer = OptimizerKind::kAdaptiveMoments;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double baseline_decay = 0.9;
  std::uint64_t seed = 0;
  std::size_t log_every = 1;
  /// 0 disables early stopping; k > 0 stops once the argmax has been the
  /// same for k consecutive log checks.
  std::size_t stable_argmax_checks = 0;

  double effective_learning_rate() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

std::string to_string(SearchMode mode);
std::string to_string(OptimizerKind kind);

struct ObjectiveValue {
  double value = 0.0;
  CoreSet gradient;
};

/// Reward source for the search loop. Any inner training problem lives
/// behind this interface; the engine only ever sees rewards.
class TaskEvaluator {
 public:
  virtual ~TaskEvaluator() = default;

  /// Validation reward, higher is better. Must be deterministic per index.
  virtual double evaluate(const SubgraphIndex& index) const = 0;

  /// Test-time metric for the final subgraph, when the task has one.
  virtual std::optional<double> final_evaluate(const SubgraphIndex&) const {
    return std::nullopt;
  }

  virtual bool has_relaxed_objective() const { return false; }
  /// Differentiable relaxation of the reward under `dist`.
  virtual ObjectiveValue relaxed_objective(const TnDistribution& dist) const;
};

struct TrajectoryRecord {
  std::size_t iteration = 0;
  double reward_mean = 0.0;
  /// Exact objective under the current distribution; NaN when unavailable.
  double objective = 0.0;
  /// Sum of per-edge marginal entropies.
  double entropy = 0.0;
  SubgraphIndex argmax;
};

struct SearchReport {
  SubgraphIndex best_index;
  double best_score = 0.0;
  bool argmax_exact = true;
  std::vector<TrajectoryRecord> trajectory;
  double wall_time = 0.0;
  std::size_t evaluations_used = 0;
  std::size_t iterations_run = 0;
};

nlohmann::json to_json(const SearchReport& report, bool include_wall_time = true);
/// `iter,reward_mean,objective,argmax_index`
std::string trajectory_csv(const SearchReport& report);

/// Ascent step on `cores`. Plain gradient: beta += lr * g. Adaptive moments:
/// bias-corrected first/second moment update along +g.
void update_step(CoreSet& cores, const CoreSet& grads, OptimizerState& state,
                 const SearchConfig& cfg);

struct SearchHooks {
  std::size_t checkpoint_every = 0;
  std::function<void(std::size_t iteration, const TnDistribution&,
                     const OptimizerState&)>
      on_checkpoint;
  /// Test hook: rewrites each step's gradient before the update.
  std::function<void(CoreSet&)> gradient_filter;
};

/// Runs the sample/evaluate/update loop (or relaxed gradient ascent), then
/// extracts the argmax subgraph and scores it. `dist` is updated in place.
SearchReport search(TnDistribution& dist, const TaskEvaluator& evaluator,
                    const SearchConfig& cfg, const SearchHooks& hooks = {},
                    OptimizerState* state = nullptr);

/// Single stochastic gradient estimate: mean over samples of
/// (reward - baseline) * grad log p. Exposed for tests.
CoreSet score_function_gradient(const TnDistribution& dist,
                                const std::vector<SubgraphIndex>& samples,
                                const std::vector<double>& rewards,
                                double baseline);

struct BaselineConfig {
  SearchConfig search;
  std::size_t rank = 2;
  InitSpec init = InitSpec::gaussian(1e-3);
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

struct BaselineRow {
  std::string algorithm;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> scores;
};

/// Uniform random search with `budget` evaluations; returns the final score
/// of the best-by-validation index.
double random_search(const Supernet& s, const TaskEvaluator& evaluator,
                     std::size_t budget, std::uint64_t seed,
                     SubgraphIndex* best = nullptr);

/// TRACE at the configured rank, uniform random search at equal budget, and
/// the rank-1 ablation, each over every seed.
std::vector<BaselineRow> compare_baselines(
    std::shared_ptr<const Supernet> supernet, const TaskEvaluator& evaluator,
    const BaselineConfig& cfg);

/// Mean and sample standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& xs);

}  // namespace tnsupernet
