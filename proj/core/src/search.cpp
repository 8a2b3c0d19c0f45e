#include "tnsupernet/search.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "tnsupernet/errors.hpp"

namespace tnsupernet {

namespace {

std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool all_finite(const CoreSet& cores) {
  for (const auto& c : cores)
    for (double x : c.values)
      if (!std::isfinite(x)) return false;
  return true;
}

double marginal_entropy(const TnDistribution& dist) {
  double h = 0.0;
  for (std::size_t t = 0; t < dist.supernet().num_edges(); ++t) {
    for (double p : dist.edge_marginal(t)) {
      if (p > 0.0) h -= p * std::log(p);
    }
  }
  return h;
}

nlohmann::json index_json(const SubgraphIndex& idx) {
  nlohmann::json arr = nlohmann::json::array();
  for (auto p : idx.picks) arr.push_back(p + 1);
  return arr;
}

// Hard failure when the extracted argmax disagrees with the brute-force
// table.
void check_argmax_against_oracle(const TnDistribution& dist,
                                 const ArgmaxResult& am) {
  const auto& lim = dist.limits();
  if (!dist.enumerable() || !dist.ranks().product_within(lim.rank_assignment_cap)) {
    return;
  }
  const auto table = dist.materialize();
  const double best = *std::max_element(table.begin(), table.end());
  const double mine = table[dist.supernet().linear_index(am.index)];
  if (std::abs(mine - best) > 1e-12 * best ||
      std::abs(am.probability - mine) > 1e-12 * best) {
    throw NumericalError("argmax " + to_string(am.index) +
                         " disagrees with the enumeration oracle");
  }
}

}  // namespace

double SearchConfig::effective_learning_rate() const {
  if (learning_rate) return *learning_rate;
  return mode == SearchMode::kStochastic ? 0.05 : 0.01;
}

void SearchConfig::validate() const {
  if (iterations == 0) throw ConfigError("iterations", "iterations must be positive");
  if (samples_per_step == 0) {
    throw ConfigError("samples_per_step", "samples_per_step must be positive");
  }
  if (log_every == 0) throw ConfigError("log_every", "log_every must be positive");
  if (!(effective_learning_rate() > 0.0)) {
    throw ConfigError("learning_rate", "learning_rate must be > 0");
  }
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) {
    throw ConfigError("baseline_decay", "baseline_decay must lie in [0, 1)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon", "epsilon must be > 0");
}

std::string to_string(SearchMode mode) {
  return mode == SearchMode::kStochastic ? "stochastic" : "deterministic";
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kPlainGradient ? "plain-gradient"
                                               : "adaptive-moments";
}

ObjectiveValue TaskEvaluator::relaxed_objective(const TnDistribution&) const {
  throw ConfigError("mode", "task has no relaxed objective");
}

nlohmann::json to_json(const SearchReport& report, bool include_wall_time) {
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& r : report.trajectory) {
    traj.push_back({{"iteration", r.iteration},
                    {"reward_mean", r.reward_mean},
                    {"objective", std::isnan(r.objective) ? nlohmann::json()
                                                           : nlohmann::json(r.objective)},
                    {"entropy", r.entropy},
                    {"argmax", index_json(r.argmax)}});
  }
  nlohmann::json doc{{"best_index", index_json(report.best_index)},
                     {"best_score", report.best_score},
                     {"argmax_exact", report.argmax_exact},
                     {"evaluations_used", report.evaluations_used},
                     {"iterations_run", report.iterations_run},
                     {"trajectory", traj}};
  if (include_wall_time) doc["wall_time"] = report.wall_time;
  return doc;
}

std::string trajectory_csv(const SearchReport& report) {
  std::ostringstream out;
  out << "iter,reward_mean,objective,argmax_index\n";
  for (const auto& r : report.trajectory) {
    out << r.iteration << ',' << format_double(r.reward_mean) << ','
        << format_double(r.objective) << ',' << to_compact_string(r.argmax)
        << '\n';
  }
  return out.str();
}

void update_step(CoreSet& cores, const CoreSet& grads, OptimizerState& state,
                 const SearchConfig& cfg) {
  if (cores.size() != grads.size()) {
    throw DataError("update_step: gradient has " + std::to_string(grads.size()) +
                    " cores, parameters have " + std::to_string(cores.size()));
  }
  for (std::size_t t = 0; t < cores.size(); ++t) {
    if (!cores[t].same_shape(grads[t]) || cores[t].size() != grads[t].size()) {
      throw DataError("update_step: shape mismatch on core " + std::to_string(t + 1));
    }
  }
  const double lr = cfg.effective_learning_rate();
  ++state.step;
  if (cfg.optimizer == OptimizerKind::kPlainGradient) {
    for (std::size_t t = 0; t < cores.size(); ++t)
      for (std::size_t k = 0; k < cores[t].size(); ++k)
        cores[t].values[k] += lr * grads[t].values[k];
    return;
  }
  if (state.first_moment.size() != cores.size()) {
    state.first_moment = grads;
    state.second_moment = grads;
    for (auto& c : state.first_moment) std::fill(c.values.begin(), c.values.end(), 0.0);
    for (auto& c : state.second_moment) std::fill(c.values.begin(), c.values.end(), 0.0);
  }
  const double step = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, step);
  const double c2 = 1.0 - std::pow(cfg.beta2, step);
  for (std::size_t t = 0; t < cores.size(); ++t) {
    auto& m = state.first_moment[t].values;
    auto& v = state.second_moment[t].values;
    const auto& g = grads[t].values;
    auto& p = cores[t].values;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] += lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

CoreSet score_function_gradient(const TnDistribution& dist,
                                const std::vector<SubgraphIndex>& samples,
                                const std::vector<double>& rewards,
                                double baseline) {
  CoreSet grad = dist.zero_like();
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double advantage = rewards[k] - baseline;
    if (advantage == 0.0) continue;
    const CoreSet g = dist.log_prob_grad(samples[k]);
    for (std::size_t t = 0; t < grad.size(); ++t)
      for (std::size_t j = 0; j < grad[t].size(); ++j)
        grad[t].values[j] += inv * advantage * g[t].values[j];
  }
  return grad;
}

SearchReport search(TnDistribution& dist, const TaskEvaluator& evaluator,
                    const SearchConfig& cfg, const SearchHooks& hooks,
                    OptimizerState* state_in) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const bool stochastic = cfg.mode == SearchMode::kStochastic;
  if (!stochastic && !evaluator.has_relaxed_objective() && !dist.enumerable()) {
    throw ConfigError("mode",
                      "deterministic mode needs a relaxed objective or an "
                      "enumerable subgraph space");
  }

  OptimizerState local_state;
  OptimizerState& state = state_in ? *state_in : local_state;
  std::mt19937_64 rng(cfg.seed);
  SearchReport report;
  double baseline = 0.0;
  bool baseline_set = false;
  std::optional<SubgraphIndex> last_argmax;
  std::size_t stable_checks = 0;

  auto exact_objective = [&](double fallback) -> double {
    if (!stochastic) return fallback;
    if (evaluator.has_relaxed_objective()) return evaluator.relaxed_objective(dist).value;
    return std::numeric_limits<double>::quiet_NaN();
  };

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    CoreSet grad;
    double reward_mean = 0.0;
    double objective = 0.0;
    try {
      if (stochastic) {
        AncestralSampler sampler(dist);
        std::vector<SubgraphIndex> samples;
        std::vector<double> rewards;
        samples.reserve(cfg.samples_per_step);
        rewards.reserve(cfg.samples_per_step);
        for (std::size_t k = 0; k < cfg.samples_per_step; ++k) {
          samples.push_back(sampler.sample(rng));
          rewards.push_back(evaluator.evaluate(samples.back()));
          if (!std::isfinite(rewards.back())) {
            throw NumericalError("non-finite reward for " + to_string(samples.back()));
          }
        }
        report.evaluations_used += cfg.samples_per_step;
        reward_mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                      static_cast<double>(rewards.size());
        if (!baseline_set) {
          baseline = reward_mean;
          baseline_set = true;
        } else {
          baseline = cfg.baseline_decay * baseline +
                     (1.0 - cfg.baseline_decay) * reward_mean;
        }
        grad = score_function_gradient(dist, samples, rewards, baseline);
      } else {
        ObjectiveValue obj;
        if (evaluator.has_relaxed_objective()) {
          obj = evaluator.relaxed_objective(dist);
        } else {
          auto e = dist.expectation_grad(
              [&](const SubgraphIndex& idx) { return evaluator.evaluate(idx); });
          report.evaluations_used += *dist.supernet().space_size_within(
              dist.limits().enumeration_cap);
          obj = ObjectiveValue{e.value, std::move(e.gradient)};
        }
        if (!std::isfinite(obj.value)) throw NumericalError("non-finite objective");
        reward_mean = obj.value;
        grad = std::move(obj.gradient);
      }
    } catch (const NumericalError& ex) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + ex.what());
    } catch (const ConfigError&) {
      throw;
    } catch (const CapExceeded&) {
      throw;
    } catch (const DataError& ex) {
      throw DataError("evaluator failed at iteration " + std::to_string(it) +
                      ": " + ex.what());
    } catch (const std::exception& ex) {
      throw Error("evaluator failed at iteration " + std::to_string(it) + ": " +
                  ex.what());
    }

    if (hooks.gradient_filter) hooks.gradient_filter(grad);
    if (!all_finite(grad)) {
      throw NumericalError("iteration " + std::to_string(it) + ": non-finite gradient");
    }

    const bool log_now = it % cfg.log_every == 0 || it == cfg.iterations;
    bool stop = false;
    if (log_now) {
      objective = exact_objective(reward_mean);
      auto am = dist.argmax();
      if (cfg.stable_argmax_checks > 0) {
        stable_checks = (last_argmax && *last_argmax == am.index) ? stable_checks + 1 : 1;
        stop = stable_checks >= cfg.stable_argmax_checks;
      }
      last_argmax = am.index;
      report.trajectory.push_back(
          {it, reward_mean, objective, marginal_entropy(dist), std::move(am.index)});
    }

    CoreSet params = dist.parameters();
    update_step(params, grad, state, cfg);
    try {
      dist.set_parameters(std::move(params));
    } catch (const NumericalError& ex) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + ex.what());
    }
    report.iterations_run = it;

    if (hooks.on_checkpoint && hooks.checkpoint_every > 0 &&
        it % hooks.checkpoint_every == 0) {
      hooks.on_checkpoint(it, dist, state);
    }
    if (stop) break;
  }

  const ArgmaxResult am = dist.argmax();
  check_argmax_against_oracle(dist, am);
  report.best_index = am.index;
  report.argmax_exact = am.exact;
  auto final_score = evaluator.final_evaluate(am.index);
  report.best_score = final_score ? *final_score : evaluator.evaluate(am.index);
  report.evaluations_used += 1;
  report.wall_time = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  return report;
}

double random_search(const Supernet& s, const TaskEvaluator& evaluator,
                     std::size_t budget, std::uint64_t seed, SubgraphIndex* best) {
  if (budget == 0) throw ConfigError("budget", "random search needs a positive budget");
  std::mt19937_64 rng(seed);
  SubgraphIndex winner;
  double best_val = -std::numeric_limits<double>::infinity();
  SubgraphIndex idx = first_index(s);
  for (std::size_t k = 0; k < budget; ++k) {
    for (std::size_t t = 0; t < s.num_edges(); ++t) {
      std::uniform_int_distribution<std::size_t> pick(0, s.edge(t).num_choices() - 1);
      idx[t] = pick(rng);
    }
    const double v = evaluator.evaluate(idx);
    if (v > best_val) {
      best_val = v;
      winner = idx;
    }
  }
  if (best) *best = winner;
  auto final_score = evaluator.final_evaluate(winner);
  return final_score ? *final_score : best_val;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

std::vector<BaselineRow> compare_baselines(
    std::shared_ptr<const Supernet> supernet, const TaskEvaluator& evaluator,
    const BaselineConfig& cfg) {
  const std::size_t budget = cfg.search.iterations * cfg.search.samples_per_step;
  if (budget == 0) throw ConfigError("budget", "evaluation budget must be positive");
  if (cfg.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");

  auto run_trace = [&](std::size_t rank) {
    BaselineRow row{rank == 1 ? "rank1" : "trace", 0.0, 0.0, {}};
    for (auto seed : cfg.seeds) {
      SearchConfig sc = cfg.search;
      sc.seed = seed;
      auto dist = init_distribution(supernet, RankMap::uniform(*supernet, rank),
                                    cfg.init, seed);
      row.scores.push_back(search(dist, evaluator, sc).best_score);
    }
    std::tie(row.mean, row.stddev) = mean_std(row.scores);
    return row;
  };

  std::vector<BaselineRow> rows;
  rows.push_back(run_trace(cfg.rank));
  BaselineRow rnd{"random", 0.0, 0.0, {}};
  for (auto seed : cfg.seeds) {
    rnd.scores.push_back(random_search(*supernet, evaluator, budget, seed));
  }
  std::tie(rnd.mean, rnd.stddev) = mean_std(rnd.scores);
  rows.push_back(std::move(rnd));
  rows.push_back(run_trace(1));
  return rows;
}

}  // namespace tnsupernet
