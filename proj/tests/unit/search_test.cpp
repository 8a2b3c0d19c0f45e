#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tnsupernet/errors.hpp"
#include "tnsupernet/search.hpp"
#include "tnsupernet/tabular.hpp"

namespace {

using namespace tnsupernet;

std::shared_ptr<const Supernet> share(Supernet s) {
  return std::make_shared<const Supernet>(std::move(s));
}

// Rewards from a fixed vector in lexicographic order, no relaxation.
class TableEvaluator : public TaskEvaluator {
 public:
  TableEvaluator(std::shared_ptr<const Supernet> s, std::vector<double> scores)
      : s_(std::move(s)), scores_(std::move(scores)) {}
  double evaluate(const SubgraphIndex& idx) const override {
    ++calls;
    return scores_[s_->linear_index(idx)];
  }
  mutable std::size_t calls = 0;

 private:
  std::shared_ptr<const Supernet> s_;
  std::vector<double> scores_;
};

std::vector<double> planted_scores(const Supernet& s, const SubgraphIndex& planted,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  std::vector<double> out;
  auto idx = first_index(s);
  do out.push_back(idx == planted ? 1.0 : u(rng));
  while (next_index(s, idx));
  return out;
}

TEST(UpdateStep, PlainGradientAddsScaledGradient) {
  CoreSet cores{EdgeCore(0, 2, 3, 2, 0.5)};
  CoreSet grads{EdgeCore(0, 2, 3, 2, 1.0)};
  OptimizerState st;
  SearchConfig cfg;
  cfg.optimizer = OptimizerKind::kPlainGradient;
  cfg.learning_rate = 0.1;
  update_step(cores, grads, st, cfg);
  for (double x : cores[0].values) EXPECT_DOUBLE_EQ(x, 0.6);
}

TEST(UpdateStep, AdaptiveMomentsZeroGradientLeavesParameters) {
  CoreSet cores{EdgeCore(0, 2, 3, 2, 0.25)};
  CoreSet grads{EdgeCore(0, 2, 3, 2, 0.0)};
  OptimizerState st;
  SearchConfig cfg;
  for (int k = 0; k < 5; ++k) update_step(cores, grads, st, cfg);
  for (double x : cores[0].values) EXPECT_EQ(x, 0.25);
  EXPECT_EQ(st.step, 5u);
}

TEST(UpdateStep, AdaptiveMomentsFirstStepIsSignTimesLr) {
  // With bias correction the first step is lr * g / (|g| + eps).
  CoreSet cores{EdgeCore(0, 1, 2, 1, 0.0)};
  CoreSet grads{EdgeCore(0, 1, 2, 1)};
  grads[0].values = {3.0, -0.5};
  OptimizerState st;
  SearchConfig cfg;
  cfg.learning_rate = 0.05;
  update_step(cores, grads, st, cfg);
  EXPECT_NEAR(cores[0].values[0], 0.05, 1e-9);
  EXPECT_NEAR(cores[0].values[1], -0.05, 1e-9);
}

TEST(UpdateStep, ShapeMismatchRaises) {
  CoreSet cores{EdgeCore(0, 2, 3, 2)};
  CoreSet grads{EdgeCore(0, 1, 3, 2)};
  OptimizerState st;
  EXPECT_THROW(update_step(cores, grads, st, SearchConfig{}), DataError);
}

TEST(ScoreFunction, ConstantRewardGivesZeroAdvantage) {
  auto s = share(make_chain(2, 3));
  auto dist = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::gaussian(0.5), 1);
  std::mt19937_64 rng(0);
  std::vector<SubgraphIndex> samples;
  for (int k = 0; k < 8; ++k) samples.push_back(sample(dist, rng));
  const std::vector<double> rewards(8, 0.7);
  for (const auto& c : score_function_gradient(dist, samples, rewards, 0.7))
    for (double x : c.values) EXPECT_NEAR(x, 0.0, 1e-12);
}

TEST(Search, ConstantRewardKeepsParametersAndTrajectory) {
  auto s = share(make_chain(2, 3));
  auto dist = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::gaussian(0.1), 4);
  const auto before = dist.parameters();
  TableEvaluator eval(s, std::vector<double>(9, 0.3));
  SearchConfig cfg;
  cfg.iterations = 50;
  const auto report = search(dist, eval, cfg);
  for (std::size_t t = 0; t < before.size(); ++t)
    for (std::size_t k = 0; k < before[t].size(); ++k)
      EXPECT_NEAR(dist.parameters()[t].values[k], before[t].values[k], 1e-12);
  for (const auto& r : report.trajectory) EXPECT_DOUBLE_EQ(r.reward_mean, 0.3);
}

TEST(Search, StochasticFindsPlantedOptimum) {
  auto s = share(make_chain(2, 3));
  const auto planted = parse_index("3,2");
  int found = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TableEvaluator eval(s, planted_scores(*s, planted, 1000 + seed));
    auto dist = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::gaussian(1e-3), seed);
    SearchConfig cfg;
    cfg.iterations = 300;
    cfg.seed = seed;
    found += search(dist, eval, cfg).best_index == planted;
  }
  EXPECT_GE(found, 9);
}

TEST(Search, DeterministicExpectationAscentIsMonotone) {
  auto s = share(make_chain(2, 2));
  TableEvaluator eval(s, {1.0, 0.0, 0.0, 0.0});
  auto dist = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::zeros(), 0);
  SearchConfig cfg;
  cfg.mode = SearchMode::kDeterministic;
  cfg.iterations = 500;
  cfg.learning_rate = 0.05;
  const auto report = search(dist, eval, cfg);
  ASSERT_EQ(report.trajectory.size(), 500u);
  for (std::size_t k = 1; k < report.trajectory.size(); ++k) {
    EXPECT_GE(report.trajectory[k].objective, report.trajectory[k - 1].objective - 1e-12);
  }
  EXPECT_GT(dist.prob(parse_index("1,1")), 0.99);
  EXPECT_EQ(report.best_index, parse_index("1,1"));
}

TEST(Search, DeterministicNeedsRelaxationOrEnumeration) {
  auto s = share(make_chain(3, 5));
  auto dist = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::zeros(), 0,
                                {10, 1'000'000, 1'000'000});
  TableEvaluator eval(s, std::vector<double>(125, 0.0));
  SearchConfig cfg;
  cfg.mode = SearchMode::kDeterministic;
  EXPECT_THROW(search(dist, eval, cfg), ConfigError);
}

TEST(Search, BudgetAccountingIsExact) {
  auto s = share(make_chain(2, 3));
  TableEvaluator eval(s, planted_scores(*s, parse_index("1,1"), 3));
  auto dist = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::gaussian(1e-3), 0);
  SearchConfig cfg;
  cfg.iterations = 37;
  cfg.samples_per_step = 5;
  const auto report = search(dist, eval, cfg);
  EXPECT_EQ(report.evaluations_used, 37u * 5u + 1u);
  EXPECT_EQ(eval.calls, report.evaluations_used);
  EXPECT_EQ(report.iterations_run, 37u);
  EXPECT_LE(report.trajectory.size(), 37u);
}

TEST(Search, SameSeedSameReport) {
  auto s = share(make_ring(3, 3));
  TableEvaluator eval(s, planted_scores(*s, parse_index("2,2,3"), 9));
  auto run = [&] {
    auto dist = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::gaussian(1e-3), 5);
    SearchConfig cfg;
    cfg.iterations = 60;
    cfg.seed = 5;
    auto rep = search(dist, eval, cfg);
    return std::make_pair(to_json(rep, false).dump(), dist.parameters());
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  for (std::size_t t = 0; t < a.second.size(); ++t) EXPECT_EQ(a.second[t].values, b.second[t].values);
}

TEST(Search, EarlyStopOnStableArgmax) {
  auto s = share(make_chain(2, 2));
  TableEvaluator eval(s, {1.0, 0.0, 0.0, 0.0});
  auto dist = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::zeros(), 0);
  SearchConfig cfg;
  cfg.mode = SearchMode::kDeterministic;
  cfg.iterations = 1000;
  cfg.stable_argmax_checks = 5;
  const auto report = search(dist, eval, cfg);
  EXPECT_EQ(report.iterations_run, 5u);
}

TEST(Search, NonFiniteGradientAborts) {
  auto s = share(make_chain(2, 2));
  TableEvaluator eval(s, {1.0, 0.0, 0.0, 0.0});
  auto dist = init_distribution(s, RankMap::uniform(*s, 1), InitSpec::zeros(), 0);
  SearchConfig cfg;
  SearchHooks hooks;
  hooks.gradient_filter = [](CoreSet& g) { g[0].values[0] = INFINITY; };
  EXPECT_THROW(search(dist, eval, cfg, hooks), NumericalError);
}

TEST(Search, ConfigValidation) {
  SearchConfig cfg;
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.learning_rate = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.baseline_decay = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_DOUBLE_EQ(SearchConfig{}.effective_learning_rate(), 0.05);
  cfg = {};
  cfg.mode = SearchMode::kDeterministic;
  EXPECT_DOUBLE_EQ(cfg.effective_learning_rate(), 0.01);
}

TEST(Report, CsvAndJsonShape) {
  SearchReport r;
  r.best_index = parse_index("2,1");
  r.trajectory.push_back({1, 0.5, NAN, 1.0, parse_index("2,1")});
  r.trajectory.push_back({2, 0.25, 0.75, 0.9, parse_index("1,3")});
  EXPECT_EQ(trajectory_csv(r), "iter,reward_mean,objective,argmax_index\n1,0.5,,2-1\n2,0.25,0.75,1-3\n");
  const auto doc = to_json(r, false);
  EXPECT_FALSE(doc.contains("wall_time"));
  EXPECT_EQ(doc["best_index"], nlohmann::json({2, 1}));
  EXPECT_TRUE(doc["trajectory"][0]["objective"].is_null());
}

TEST(Baselines, RandomSearchBudget) {
  auto s = share(make_chain(2, 3));
  TableEvaluator eval(s, planted_scores(*s, parse_index("2,2"), 1));
  EXPECT_THROW(random_search(*s, eval, 0, 0), ConfigError);
  SubgraphIndex best;
  EXPECT_DOUBLE_EQ(random_search(*s, eval, 200, 0, &best), 1.0);
  EXPECT_EQ(best, parse_index("2,2"));
  EXPECT_EQ(eval.calls, 200u);
}

TEST(Baselines, CompareOnPlantedTask) {
  SyntheticSpec spec;
  spec.supernet = share(make_chain(2, 3));
  spec.planted = parse_index("3,1");
  spec.seed = 2;
  auto bench = std::make_shared<const TabularBenchmark>(generate_synthetic(spec));
  TabularEvaluator eval(bench);
  BaselineConfig cfg;
  cfg.search.iterations = 100;
  const auto rows = compare_baselines(spec.supernet, eval, cfg);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].algorithm, "trace");
  EXPECT_EQ(rows[1].algorithm, "random");
  EXPECT_EQ(rows[2].algorithm, "rank1");
  EXPECT_GE(rows[0].mean, rows[1].mean);
  for (const auto& r : rows) EXPECT_EQ(r.scores.size(), 5u);

  cfg.search.samples_per_step = 0;
  EXPECT_THROW(compare_baselines(spec.supernet, eval, cfg), ConfigError);
}

TEST(Baselines, MeanStd) {
  const auto [m, sd] = mean_std({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m, 2.5);
  EXPECT_NEAR(sd, std::sqrt(5.0 / 3.0), 1e-15);
}

}  // namespace
