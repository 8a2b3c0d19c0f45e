#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "tnsupernet/errors.hpp"
#include "tnsupernet/selfcheck.hpp"
#include "tnsupernet/tn_distribution.hpp"

namespace {

using namespace tnsupernet;

std::shared_ptr<const Supernet> share(Supernet s) {
  return std::make_shared<const Supernet>(std::move(s));
}

TnDistribution random_dist(std::shared_ptr<const Supernet> s, std::size_t rank,
                           std::uint64_t seed, double sd = 1.0) {
  return init_distribution(s, RankMap::uniform(*s, rank), InitSpec::gaussian(sd), seed);
}

// Single edge, 2 choices, both endpoint ranks 2, slice (1,1) = [ln 3, 0].
TnDistribution hand_example() {
  auto s = share(make_chain(1, 2));
  CoreSet cores{EdgeCore(0, 2, 2, 2)};
  cores[0].at(0, 0, 0) = std::log(3.0);
  return TnDistribution(s, RankMap::uniform(*s, 2), cores);
}

Supernet self_loop_net() {
  return Supernet("loops", {"a", "b", "c"},
                  {{"a", "b", {"x", "y"}}, {"b", "b", {"x", "y", "z"}},
                   {"b", "c", {"x", "y"}}, {"c", "a", {"x", "y"}}});
}

TEST(NormalizedCore, SoftmaxAlongChoiceAxis) {
  EdgeCore c(0, 1, 3, 1);
  auto n = normalized_core(c);
  for (double x : n.values) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);

  EdgeCore d(0, 1, 2, 1);
  d.values = {std::log(3.0), 0.0};
  n = normalized_core(d);
  EXPECT_NEAR(n.values[0], 0.75, 1e-15);
  EXPECT_NEAR(n.values[1], 0.25, 1e-15);

  d.values = {1000.0, 0.0};
  n = normalized_core(d);
  EXPECT_TRUE(std::isfinite(n.values[0]));
  EXPECT_NEAR(n.values[0], 1.0, 1e-15);
  EXPECT_NEAR(n.values[1], 0.0, 1e-15);
}

TEST(NormalizedCore, EverySliceSumsToOne) {
  auto d = random_dist(share(make_ring(3, 4)), 3, 11, 2.0);
  for (const auto& a : d.normalized())
    for (std::size_t r = 0; r < a.left_rank; ++r)
      for (std::size_t r2 = 0; r2 < a.right_rank; ++r2) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.choices; ++i) s += a.at(r, i, r2);
        EXPECT_NEAR(s, 1.0, 1e-15);
      }
}

TEST(InitDistribution, ShapesAndDeterminism) {
  auto s = share(make_chain(3, 5));
  auto d = random_dist(s, 2, 42, 0.01);
  for (const auto& c : d.parameters()) {
    EXPECT_EQ(c.left_rank, 2u);
    EXPECT_EQ(c.choices, 5u);
    EXPECT_EQ(c.right_rank, 2u);
  }
  auto again = random_dist(s, 2, 42, 0.01);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(0, std::memcmp(d.parameters()[t].values.data(), again.parameters()[t].values.data(),
                             d.parameters()[t].values.size() * sizeof(double)));
  }
}

TEST(InitDistribution, ZerosGiveUniform) {
  auto s = share(make_star(3, 3));
  auto d = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::zeros(), 0);
  for (double p : d.materialize()) EXPECT_NEAR(p, 1.0 / 27.0, 1e-15);
  EXPECT_NEAR(d.prob(parse_index("3,1,2")), 1.0 / 27.0, 1e-15);
}

TEST(Prob, HandEnumeratedExample) {
  auto d = hand_example();
  EXPECT_NEAR(d.prob(parse_index("1")), 0.5625, 1e-15);
  EXPECT_NEAR(d.prob(parse_index("2")), 0.4375, 1e-15);
  EXPECT_NEAR(oracle::prob(d.supernet(), d.ranks().values(), d.parameters(), parse_index("1")),
              0.5625, 1e-15);
  EXPECT_NEAR(d.materialize()[0], 0.5625, 1e-15);
}

TEST(Prob, RankOneIsProductOfSoftmaxes) {
  auto d = random_dist(share(make_ring(3, 3)), 1, 5);
  const auto idx = parse_index("2,3,1");
  double expected = 1.0;
  for (std::size_t t = 0; t < 3; ++t) {
    expected *= oracle::softmax_slice(d.parameters()[t], 0, 0)[idx[t]];
  }
  EXPECT_NEAR(d.prob(idx), expected, 1e-15);
}

TEST(Prob, MatchesBruteForceOnAssortedTopologies) {
  std::vector<std::shared_ptr<const Supernet>> nets{
      share(make_chain(3, 3)), share(make_ring(3, 3)), share(make_star(4, 2)),
      share(self_loop_net())};
  for (const auto& s : nets) {
    for (std::size_t rank : {1, 2, 3}) {
      auto d = random_dist(s, rank, 100 + rank);
      const auto ref = oracle::table(d);
      const auto mat = d.materialize();
      auto idx = first_index(*s);
      std::size_t k = 0;
      do {
        EXPECT_NEAR(d.prob(idx), ref[k], 1e-12 * ref[k]) << s->name() << " R=" << rank;
        EXPECT_NEAR(mat[k], ref[k], 1e-12 * ref[k]) << s->name() << " R=" << rank;
        ++k;
      } while (next_index(*s, idx));
    }
  }
}

TEST(Prob, MixedRanksPerNode) {
  auto s = share(make_chain(3, 3));
  RankMap ranks({1, 3, 2, 4});
  auto d = init_distribution(s, ranks, InitSpec::gaussian(1.0), 9);
  const auto ref = oracle::table(d);
  EXPECT_NEAR(std::accumulate(ref.begin(), ref.end(), 0.0), 1.0, 1e-12);
  EXPECT_NEAR(d.prob(parse_index("3,2,1")), ref[s->linear_index(parse_index("3,2,1"))], 1e-14);
}

TEST(Materialize, NormalizesAndMatchesRingFormula) {
  auto zeros = init_distribution(share(make_chain(2, 2)), RankMap::uniform(make_chain(2, 2), 2),
                                 InitSpec::zeros(), 0);
  for (double p : zeros.materialize()) EXPECT_DOUBLE_EQ(p, 0.25);

  auto s = share(make_ring(3, 2));
  auto d = random_dist(s, 2, 3);
  const auto table = d.materialize();
  EXPECT_NEAR(std::accumulate(table.begin(), table.end(), 0.0), 1.0, 1e-10);

  // T_{i1,i2,i3} = 1/R^3 sum_{r0,r1,r2} A1[r0,i1,r1] A2[r1,i2,r2] A3[r2,i3,r0]
  const auto& a = d.normalized();
  auto idx = first_index(*s);
  std::size_t k = 0;
  do {
    double sum = 0.0;
    for (std::size_t r0 = 0; r0 < 2; ++r0)
      for (std::size_t r1 = 0; r1 < 2; ++r1)
        for (std::size_t r2 = 0; r2 < 2; ++r2)
          sum += a[0].at(r0, idx[0], r1) * a[1].at(r1, idx[1], r2) * a[2].at(r2, idx[2], r0);
    EXPECT_NEAR(table[k++], sum / 8.0, 1e-15);
  } while (next_index(*s, idx));
}

TEST(Materialize, CapsAreEnforced) {
  auto s = share(make_chain(3, 5));
  auto d = random_dist(s, 2, 0);
  d.set_limits({100, 1'000'000, 1'000'000});
  EXPECT_THROW(d.materialize(), CapExceeded);
  d.set_limits({1'000'000, 8, 1'000'000});
  EXPECT_THROW(d.materialize(), CapExceeded);
}

TEST(Topology, ChainAndRingDifferForSameCores) {
  auto chain = share(make_chain(3, 2));
  auto ring = share(make_ring(3, 2));
  auto dc = random_dist(chain, 2, 17);
  TnDistribution dr(ring, RankMap::uniform(*ring, 2), dc.parameters());
  const auto tc = dc.materialize();
  const auto tr = dr.materialize();
  double diff = 0.0;
  for (std::size_t k = 0; k < tc.size(); ++k) diff = std::max(diff, std::abs(tc[k] - tr[k]));
  EXPECT_GT(diff, 1e-6);
}

TEST(Marginal, UniformAndRankOneCases) {
  auto s = share(make_chain(3, 4));
  auto zeros = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::zeros(), 0);
  const std::vector<std::size_t> prefix{3, 1};
  for (double p : zeros.marginal(2, prefix)) EXPECT_NEAR(p, 0.25, 1e-15);

  auto r1 = random_dist(s, 1, 8);
  const auto own = oracle::softmax_slice(r1.parameters()[1], 0, 0);
  for (std::size_t c : {0u, 3u}) {
    const std::vector<std::size_t> cond{c};
    const auto m = r1.marginal(1, cond);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(m[i], own[i], 1e-14);
  }
}

TEST(Marginal, MatchesRenormalizedOracleSlices) {
  for (auto s : {share(make_chain(3, 3)), share(make_ring(3, 3)), share(self_loop_net())}) {
    auto d = random_dist(s, 2, 21);
    const auto ref = oracle::table(d);
    const std::size_t T = s->num_edges();
    for (std::size_t t = 0; t < T; ++t) {
      // Every prefix of length t.
      std::vector<std::size_t> prefix(t, 0);
      while (true) {
        std::vector<double> expect(s->edge(t).num_choices(), 0.0);
        auto idx = first_index(*s);
        std::size_t k = 0;
        do {
          if (std::equal(prefix.begin(), prefix.end(), idx.picks.begin())) expect[idx[t]] += ref[k];
          ++k;
        } while (next_index(*s, idx));
        const double z = std::accumulate(expect.begin(), expect.end(), 0.0);
        const auto got = d.marginal(t, prefix);
        EXPECT_NEAR(std::accumulate(got.begin(), got.end(), 0.0), 1.0, 1e-10);
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i] / z, 1e-10);

        std::size_t p = t;
        while (p-- > 0) {
          if (++prefix[p] < s->edge(p).num_choices()) break;
          prefix[p] = 0;
        }
        if (p == static_cast<std::size_t>(-1)) break;
      }
    }
  }
}

TEST(Marginal, RejectsBadConditioning) {
  auto d = random_dist(share(make_chain(3, 2)), 2, 0);
  const std::vector<std::size_t> too_short{};
  EXPECT_THROW(d.marginal(1, too_short), DataError);
  const std::vector<std::size_t> out_of_range{5};
  EXPECT_THROW(d.marginal(1, out_of_range), DataError);
}

TEST(EdgeMarginal, MatchesOracle) {
  auto s = share(self_loop_net());
  auto d = random_dist(s, 2, 4);
  const auto ref = oracle::table(d);
  for (std::size_t t = 0; t < s->num_edges(); ++t) {
    std::vector<double> expect(s->edge(t).num_choices(), 0.0);
    auto idx = first_index(*s);
    std::size_t k = 0;
    do {
      expect[idx[t]] += ref[k++];
    } while (next_index(*s, idx));
    const auto got = d.edge_marginal(t);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
  }
}

TEST(Sample, UniformFrequencies) {
  auto s = share(make_chain(2, 2));
  auto d = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::zeros(), 0);
  std::mt19937_64 rng(123);
  AncestralSampler sampler(d);
  std::vector<int> counts(4, 0);
  for (int n = 0; n < 40000; ++n) ++counts[s->linear_index(sampler.sample(rng))];
  for (int c : counts) EXPECT_NEAR(c / 40000.0, 0.25, 0.01);
}

TEST(Sample, NearDeterministicCores) {
  auto s = share(make_chain(3, 4));
  auto d = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::zeros(), 0);
  CoreSet cores = d.parameters();
  const auto planted = parse_index("2,4,1");
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t r2 = 0; r2 < 2; ++r2) cores[t].at(r, planted[t], r2) = 12.0;
  d.set_parameters(cores);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_GT(d.edge_marginal(t)[planted[t]], 0.999);
  std::mt19937_64 rng(5);
  AncestralSampler sampler(d);
  int hits = 0;
  for (int n = 0; n < 10000; ++n) hits += sampler.sample(rng) == planted;
  EXPECT_GE(hits, 9950);
}

TEST(Sample, FixedSeedIsReproducible) {
  auto d = random_dist(share(make_star(3, 3)), 2, 1);
  std::mt19937_64 a(77);
  std::mt19937_64 b(77);
  for (int n = 0; n < 200; ++n) EXPECT_EQ(sample(d, a), sample(d, b));
}

TEST(Argmax, TieBreakAndKnownMaximizers) {
  auto s = share(make_chain(3, 3));
  auto zeros = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::zeros(), 0);
  auto am = zeros.argmax();
  EXPECT_TRUE(am.exact);
  EXPECT_EQ(to_string(am.index), "(1,1,1)");

  EXPECT_EQ(to_string(hand_example().argmax().index), "(1)");

  auto r1 = random_dist(s, 1, 33);
  SubgraphIndex expect;
  for (std::size_t t = 0; t < 3; ++t) {
    const auto sm = oracle::softmax_slice(r1.parameters()[t], 0, 0);
    expect.picks.push_back(static_cast<std::size_t>(std::max_element(sm.begin(), sm.end()) - sm.begin()));
  }
  EXPECT_EQ(r1.argmax().index, expect);
}

TEST(Argmax, GreedyFallbackIsFlaggedApproximate) {
  auto d = random_dist(share(make_chain(3, 3)), 1, 2);
  const auto exact = d.argmax();
  d.set_limits({10, 1'000'000, 1'000'000});
  const auto greedy = d.argmax();
  EXPECT_FALSE(greedy.exact);
  // Rank 1 factorizes, so greedy mode selection is exact here.
  EXPECT_EQ(greedy.index, exact.index);
}

TEST(LogProbGrad, UniformSingleEdgeRankOne) {
  auto s = share(make_chain(1, 4));
  auto d = init_distribution(s, RankMap::uniform(*s, 1), InitSpec::zeros(), 0);
  const auto g = d.log_prob_grad(parse_index("3"));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g[0].values[i], (i == 2 ? 1.0 : 0.0) - 0.25, 1e-15);
}

TEST(LogProbGrad, MatchesFiniteDifferences) {
  const double h = 1e-5;
  for (auto s : {share(make_chain(3, 3)), share(make_ring(3, 3)), share(self_loop_net())}) {
    auto d = random_dist(s, 2, 55);
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 3; ++trial) {
      const auto idx = s->index_at(rng() % *s->space_size_within(1000));
      const auto g = d.log_prob_grad(idx);
      for (std::size_t t = 0; t < g.size(); ++t)
        for (std::size_t k = 0; k < g[t].size(); ++k) {
          CoreSet plus = d.parameters();
          CoreSet minus = d.parameters();
          plus[t].values[k] += h;
          minus[t].values[k] -= h;
          const double fp = std::log(oracle::prob(*s, d.ranks().values(), plus, idx));
          const double fm = std::log(oracle::prob(*s, d.ranks().values(), minus, idx));
          const double fd = (fp - fm) / (2 * h);
          EXPECT_LT(gradient_relative_error(g[t].values[k], fd), 1e-5)
              << s->name() << " core " << t << " entry " << k;
        }
    }
  }
}

TEST(LogProbGrad, ExpectedScoreIsZero) {
  auto s = share(make_star(3, 3));
  auto d = random_dist(s, 2, 8);
  CoreSet acc = d.zero_like();
  auto idx = first_index(*s);
  do {
    const double p = d.prob(idx);
    const auto g = d.log_prob_grad(idx);
    for (std::size_t t = 0; t < g.size(); ++t)
      for (std::size_t k = 0; k < g[t].size(); ++k) acc[t].values[k] += p * g[t].values[k];
  } while (next_index(*s, idx));
  for (const auto& c : acc)
    for (double x : c.values) EXPECT_NEAR(x, 0.0, 1e-8);
}

TEST(ExpectationGrad, ConstantAndIndicatorScores) {
  auto s = share(make_chain(2, 2));
  auto d = random_dist(s, 2, 3);
  auto c = d.expectation_grad([](const SubgraphIndex&) { return 2.5; });
  EXPECT_NEAR(c.value, 2.5, 1e-12);
  for (const auto& core : c.gradient)
    for (double x : core.values) EXPECT_NEAR(x, 0.0, 1e-14);

  auto zeros = init_distribution(s, RankMap::uniform(*s, 2), InitSpec::zeros(), 0);
  auto e = zeros.expectation_grad(
      [](const SubgraphIndex& i) { return i == parse_index("1,1") ? 1.0 : 0.0; });
  EXPECT_NEAR(e.value, 0.25, 1e-15);
}

TEST(ExpectationGrad, MatchesFiniteDifferences) {
  const double h = 1e-5;
  auto s = share(make_ring(3, 3));
  auto d = random_dist(s, 2, 91);
  std::mt19937_64 rng(4);
  std::vector<double> scores(27);
  for (auto& x : scores) x = std::uniform_real_distribution<double>(-1, 1)(rng);
  auto score = [&](const SubgraphIndex& i) { return scores[s->linear_index(i)]; };
  auto value_of = [&](const CoreSet& beta) {
    TnDistribution tmp(s, d.ranks(), beta);
    const auto table = oracle::table(tmp);
    double v = 0.0;
    for (std::size_t k = 0; k < table.size(); ++k) v += table[k] * scores[k];
    return v;
  };
  const auto e = d.expectation_grad(score);
  EXPECT_NEAR(e.value, value_of(d.parameters()), 1e-12);
  for (std::size_t t = 0; t < e.gradient.size(); ++t)
    for (std::size_t k = 0; k < e.gradient[t].size(); ++k) {
      CoreSet plus = d.parameters();
      CoreSet minus = d.parameters();
      plus[t].values[k] += h;
      minus[t].values[k] -= h;
      const double fd = (value_of(plus) - value_of(minus)) / (2 * h);
      EXPECT_LT(gradient_relative_error(e.gradient[t].values[k], fd), 1e-5);
    }
}

TEST(Contractor, FactorCapRaises) {
  auto s = share(make_star(4, 2));
  auto d = random_dist(s, 3, 0);
  d.set_limits({1'000'000, 1'000'000, 2});
  EXPECT_THROW(d.prob(parse_index("1,1,1,1")), CapExceeded);
}

TEST(SetParameters, RejectsNonFiniteAndMisshapen) {
  auto d = random_dist(share(make_chain(2, 2)), 2, 0);
  CoreSet bad = d.parameters();
  bad[1].values[0] = std::nan("");
  EXPECT_THROW(d.set_parameters(bad), NumericalError);
  CoreSet wrong = d.parameters();
  wrong.pop_back();
  EXPECT_THROW(d.set_parameters(wrong), ConfigError);
}

TEST(SelfCheck, PassesAndNegativeControlFails) {
  auto s = share(make_chain(3, 3));
  for (const auto& r : self_check(s, {})) EXPECT_TRUE(r.passed) << r.name << " " << r.residual;
  SelfCheckOptions corrupt;
  corrupt.corrupt_gradient = true;
  bool any_failed = false;
  for (const auto& r : self_check(s, corrupt)) any_failed |= !r.passed;
  EXPECT_TRUE(any_failed);
}

}  // namespace
