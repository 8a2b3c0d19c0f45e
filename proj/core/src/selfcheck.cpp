#include "tnsupernet/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tnsupernet {

namespace {

struct Coordinate {
  std::size_t core;
  std::size_t entry;
};

std::vector<Coordinate> pick_coordinates(const CoreSet& cores, std::size_t count,
                                         std::mt19937_64& rng) {
  std::vector<Coordinate> all;
  for (std::size_t t = 0; t < cores.size(); ++t)
    for (std::size_t k = 0; k < cores[t].size(); ++k) all.push_back({t, k});
  if (all.size() <= count) return all;
  std::vector<Coordinate> out;
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, rng);
  return out;
}

template <typename F>
double central_difference(const TnDistribution& dist, Coordinate c, double h, F&& f) {
  CoreSet plus = dist.parameters();
  CoreSet minus = dist.parameters();
  plus[c.core].values[c.entry] += h;
  minus[c.core].values[c.entry] -= h;
  TnDistribution dp(dist.supernet_ptr(), dist.ranks(), std::move(plus), dist.limits());
  TnDistribution dm(dist.supernet_ptr(), dist.ranks(), std::move(minus), dist.limits());
  return (f(dp) - f(dm)) / (2.0 * h);
}

}  // namespace

double gradient_relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / scale;
}

std::vector<CheckResult> self_check(std::shared_ptr<const Supernet> supernet,
                                    const SelfCheckOptions& options) {
  std::vector<CheckResult> out;
  const auto& s = *supernet;
  auto dist = init_distribution(supernet, RankMap::uniform(s, options.rank),
                                InitSpec::gaussian(options.init_sd), options.seed);
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);

  const auto table = dist.materialize();
  const double total = std::accumulate(table.begin(), table.end(), 0.0);
  out.push_back({"normalization", std::abs(total - 1.0), 1e-10, std::abs(total - 1.0) < 1e-10});
  const double lowest = *std::min_element(table.begin(), table.end());
  out.push_back({"positivity", lowest, 0.0, lowest > 0.0});

  // Rank-1 factorization: the table must equal the outer product of the
  // per-edge softmax vectors.
  {
    auto r1 = init_distribution(supernet, RankMap::uniform(s, 1),
                                InitSpec::gaussian(options.init_sd), options.seed + 1);
    const auto t1 = r1.materialize();
    double worst = 0.0;
    auto idx = first_index(s);
    std::size_t k = 0;
    do {
      double p = 1.0;
      for (std::size_t t = 0; t < s.num_edges(); ++t) p *= r1.normalized()[t].values[idx[t]];
      worst = std::max(worst, std::abs(p - t1[k]));
      ++k;
    } while (next_index(s, idx));
    out.push_back({"rank1_factorization", worst, 1e-14, worst <= 1e-14});
  }

  const double h = options.fd_step;
  const double bump = options.corrupt_gradient ? 1e-3 : 0.0;
  {
    const auto target = s.index_at(std::uniform_int_distribution<std::uint64_t>(
        0, table.size() - 1)(rng));
    auto grad = dist.log_prob_grad(target);
    double worst = 0.0;
    for (auto c : pick_coordinates(grad, options.fd_coordinates, rng)) {
      const double fd = central_difference(dist, c, h, [&](const TnDistribution& d) {
        return std::log(d.prob(target));
      });
      worst = std::max(worst, gradient_relative_error(grad[c.core].values[c.entry] + bump, fd));
    }
    out.push_back({"log_prob_grad", worst, 1e-5, worst < 1e-5});
  }
  {
    std::vector<double> scores(table.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& x : scores) x = u(rng);
    auto score = [&](const SubgraphIndex& i) { return scores[s.linear_index(i)]; };
    auto e = dist.expectation_grad(score);
    double worst = 0.0;
    for (auto c : pick_coordinates(e.gradient, options.fd_coordinates, rng)) {
      const double fd = central_difference(dist, c, h, [&](const TnDistribution& d) {
        return d.expectation_grad(score).value;
      });
      worst = std::max(worst, gradient_relative_error(e.gradient[c.core].values[c.entry] + bump, fd));
    }
    out.push_back({"expectation_grad", worst, 1e-5, worst < 1e-5});
  }
  return out;
}

}  // namespace tnsupernet
