#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "tnsupernet/errors.hpp"
#include "tnsupernet/tabular.hpp"

namespace {

using namespace tnsupernet;

std::shared_ptr<const Supernet> share(Supernet s) {
  return std::make_shared<const Supernet>(std::move(s));
}

constexpr const char* kTwoByTwo =
    "i_1,i_2,val,test\n"
    "1,1,0.1,0.2\n"
    "1,2,0.4,0.3\n"
    "2,1,0.9,0.8\n"
    "2,2,0.2,0.1\n";

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& ex) {
    return ex.what();
  }
  return "";
}

TEST(BenchmarkCsv, LoadsCompleteTable) {
  const auto b = parse_benchmark_csv(kTwoByTwo);
  EXPECT_EQ(b.supernet->num_edges(), 2u);
  EXPECT_EQ(b.val(parse_index("2,1")), 0.9);
  EXPECT_EQ(b.test(parse_index("1,2")), 0.3);
  EXPECT_EQ(b.best_test(), 0.8);
  EXPECT_NEAR(b.regret(parse_index("1,2")), 0.5, 1e-15);
}

TEST(BenchmarkCsv, RowOrderDoesNotMatter) {
  const auto b = parse_benchmark_csv(
      "i_1,i_2,val,test\n2,2,0.2,0.1\n1,2,0.4,0.3\n2,1,0.9,0.8\n1,1,0.1,0.2\n");
  EXPECT_EQ(b.val_score, parse_benchmark_csv(kTwoByTwo).val_score);
}

TEST(BenchmarkCsv, MissingRowNamesTheIndex) {
  const auto msg = message_of([] {
    parse_benchmark_csv("i_1,i_2,val,test\n1,1,0.1,0.2\n1,2,0.4,0.3\n2,1,0.9,0.8\n");
  });
  EXPECT_NE(msg.find("missing index (2,2)"), std::string::npos) << msg;
}

TEST(BenchmarkCsv, DuplicatesAndMalformedRowsCarryLineNumbers) {
  auto msg = message_of([] {
    parse_benchmark_csv("i_1,i_2,val,test\n1,1,0.1,0.2\n1,1,0.4,0.3\n2,1,0.9,0.8\n2,2,0,0\n");
  });
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  msg = message_of([] {
    parse_benchmark_csv("i_1,i_2,val,test\n1,1,0.1,0.2\n1,2,abc,0.3\n2,1,0.9,0.8\n2,2,0,0\n");
  });
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  msg = message_of([] { parse_benchmark_csv("a,b\n1,2\n"); });
  EXPECT_NE(msg.find("line 1"), std::string::npos) << msg;
}

TEST(BenchmarkCsv, RoundTrip) {
  const auto b = parse_benchmark_csv(kTwoByTwo);
  const auto again = parse_benchmark_csv(benchmark_csv(b), b.supernet);
  EXPECT_EQ(again.val_score, b.val_score);
  EXPECT_EQ(again.test_score, b.test_score);
}

TEST(Synthetic, GapMakesPlantedTheUniqueMaximizer) {
  SyntheticSpec spec;
  spec.supernet = share(make_chain(3, 5));
  spec.planted = parse_index("4,2,5");
  spec.seed = 11;
  const auto b = generate_synthetic(spec);
  const std::size_t k = spec.supernet->linear_index(spec.planted);
  for (const auto* table : {&b.val_score, &b.test_score}) {
    const auto best = std::max_element(table->begin(), table->end());
    EXPECT_EQ(static_cast<std::size_t>(best - table->begin()), k);
    double second = -1.0;
    for (std::size_t j = 0; j < table->size(); ++j)
      if (j != k) second = std::max(second, (*table)[j]);
    EXPECT_NEAR((*table)[k] - second, 0.3, 1e-12);
  }
}

TEST(Synthetic, PairwiseBonusStillLeavesPlantedOptimal) {
  SyntheticSpec spec;
  spec.supernet = share(make_ring(3, 3));
  spec.planted = parse_index("1,2,3");
  spec.pairwise_strength = 0.4;
  spec.noise_sd = 0.02;
  spec.seed = 3;
  const auto b = generate_synthetic(spec);
  auto idx = first_index(*spec.supernet);
  const double top = b.val(spec.planted);
  do {
    if (!(idx == spec.planted)) EXPECT_LT(b.val(idx), top);
  } while (next_index(*spec.supernet, idx));

  // The bonus rewards agreement on node-sharing edges: coordinated indices
  // sit above the mean of the table.
  const double mean = std::accumulate(b.val_score.begin(), b.val_score.end(), 0.0) /
                      static_cast<double>(b.val_score.size());
  EXPECT_GT(b.val(parse_index("2,2,2")), mean);
}

TEST(Synthetic, SameSeedSameTable) {
  SyntheticSpec spec;
  spec.supernet = share(make_chain(2, 4));
  spec.planted = parse_index("2,3");
  spec.noise_sd = 0.05;
  spec.seed = 8;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  EXPECT_EQ(a.val_score, b.val_score);
  EXPECT_EQ(a.test_score, b.test_score);
  spec.seed = 9;
  EXPECT_NE(generate_synthetic(spec).val_score, a.val_score);
}

TEST(Synthetic, SpaceTooLargeRaises) {
  SyntheticSpec spec;
  spec.supernet = share(make_chain(10, 10));
  spec.planted = SubgraphIndex{std::vector<std::size_t>(10, 0)};
  EXPECT_THROW(generate_synthetic(spec), CapExceeded);
}

TEST(TabularEvaluator, ValidationOnlyDuringSearch) {
  SyntheticSpec spec;
  spec.supernet = share(make_chain(2, 3));
  spec.planted = parse_index("1,3");
  auto bench = std::make_shared<const TabularBenchmark>(generate_synthetic(spec));
  TabularEvaluator eval(bench);
  EXPECT_EQ(eval.evaluate(spec.planted), eval.evaluate(spec.planted));
  auto dist = init_distribution(spec.supernet, RankMap::uniform(*spec.supernet, 2),
                                InitSpec::gaussian(1e-3), 0);
  SearchConfig cfg;
  cfg.iterations = 150;
  const auto report = search(dist, eval, cfg);
  EXPECT_EQ(eval.test_reads(), 1u);
  EXPECT_EQ(report.best_index, spec.planted);
  EXPECT_EQ(bench->regret(report.best_index), 0.0);
  EXPECT_EQ(report.best_score, bench->test(spec.planted));
}

TEST(TabularEvaluator, UniformExpectationIsTableMean) {
  const auto bench = std::make_shared<const TabularBenchmark>(parse_benchmark_csv(kTwoByTwo));
  TabularEvaluator eval(bench);
  auto dist = init_distribution(bench->supernet, RankMap::uniform(*bench->supernet, 2),
                                InitSpec::zeros(), 0);
  EXPECT_NEAR(eval.relaxed_objective(dist).value, (0.1 + 0.4 + 0.9 + 0.2) / 4.0, 1e-15);
  EXPECT_THROW(eval.evaluate(parse_index("3,1")), DataError);
}

// Exact-expectation ascent is local: an isolated spike carries little
// weight under a near-uniform start, so only improvement is asserted.
TEST(TabularEvaluator, DeterministicModeClimbsExpectation) {
  SyntheticSpec spec;
  spec.supernet = share(make_chain(3, 4));
  spec.planted = parse_index("4,1,3");
  spec.seed = 1;
  auto bench = std::make_shared<const TabularBenchmark>(generate_synthetic(spec));
  TabularEvaluator eval(bench);
  auto dist = init_distribution(spec.supernet, RankMap::uniform(*spec.supernet, 2),
                                InitSpec::gaussian(1e-3), 0);
  SearchConfig cfg;
  cfg.mode = SearchMode::kDeterministic;
  cfg.iterations = 400;
  cfg.learning_rate = 0.05;
  const auto report = search(dist, eval, cfg);
  const double mean = std::accumulate(bench->val_score.begin(), bench->val_score.end(), 0.0) /
                      static_cast<double>(bench->val_score.size());
  EXPECT_NEAR(report.trajectory.front().objective, mean, 1e-3);
  EXPECT_GT(report.trajectory.back().objective, mean + 0.1);
  EXPECT_GT(dist.prob(report.best_index), 0.5);
  EXPECT_EQ(eval.test_reads(), 1u);
}

}  // namespace
