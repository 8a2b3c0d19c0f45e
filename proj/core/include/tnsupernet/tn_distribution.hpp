#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "tnsupernet/contraction.hpp"
#include "tnsupernet/supernet.hpp"

namespace tnsupernet {

/// Rank R_n of the summation index attached to each supernet node.
class RankMap {
 public:
  RankMap() = default;
  explicit RankMap(std::vector<std::size_t> ranks);

  static RankMap uniform(const Supernet& s, std::size_t rank);
  /// `{"node": rank, ...}`; nodes not listed get `fallback`.
  static RankMap from_json(const Supernet& s, const nlohmann::json& doc,
                           std::size_t fallback);

  std::size_t operator[](std::size_t node) const { return ranks_.at(node); }
  std::size_t size() const noexcept { return ranks_.size(); }
  const std::vector<std::size_t>& values() const noexcept { return ranks_; }

  /// Product of ranks as a double (the normalization constant).
  double product() const;
  /// Product of ranks if it does not exceed `cap`.
  std::optional<std::uint64_t> product_within(std::uint64_t cap) const;

  bool operator==(const RankMap&) const = default;

 private:
  std::vector<std::size_t> ranks_;
};

/// Third-order block of shape left_rank x choices x right_rank, row-major.
/// Holds raw parameters, normalized probabilities, or gradients.
struct EdgeCore {
  std::size_t edge = 0;
  std::size_t left_rank = 1;
  std::size_t choices = 1;
  std::size_t right_rank = 1;
  std::vector<double> values;

  EdgeCore() = default;
  EdgeCore(std::size_t edge_id, std::size_t left, std::size_t num_choices,
           std::size_t right, double fill = 0.0);

  std::size_t size() const noexcept { return values.size(); }
  std::size_t offset(std::size_t r, std::size_t i, std::size_t r2) const {
    return (r * choices + i) * right_rank + r2;
  }
  double& at(std::size_t r, std::size_t i, std::size_t r2) {
    return values[offset(r, i, r2)];
  }
  double at(std::size_t r, std::size_t i, std::size_t r2) const {
    return values[offset(r, i, r2)];
  }
  bool same_shape(const EdgeCore& other) const noexcept {
    return left_rank == other.left_rank && choices == other.choices &&
           right_rank == other.right_rank;
  }
};

/// One array per edge, shapes matching the distribution's cores.
using CoreSet = std::vector<EdgeCore>;

/// Softmax along the choice axis of every (r, r') slice; max-subtracted.
EdgeCore normalized_core(const EdgeCore& core);

struct InitSpec {
  enum class Kind { kZeros, kGaussian };
  Kind kind = Kind::kGaussian;
  double stddev = 1e-3;

  static InitSpec zeros() { return {Kind::kZeros, 0.0}; }
  static InitSpec gaussian(double sd) { return {Kind::kGaussian, sd}; }
};

struct ContractionLimits {
  std::uint64_t enumeration_cap = 1'000'000;
  std::uint64_t rank_assignment_cap = 1'000'000;
  std::uint64_t factor_cap = 1'000'000;
};

struct ArgmaxResult {
  SubgraphIndex index;
  double probability = 0.0;
  bool exact = true;
};

/// Normalized subgraph distribution induced by softmax-parameterized edge
/// cores contracted over node rank indices:
///
///   p(i) = 1/prod_n R_n * sum_{r} prod_t softmax(beta_t)[r_{u(t)}, i_t, r_{v(t)}]
///
/// Every probability is positive and the table sums to one for any finite
/// parameters. Evaluation is const and thread-compatible; parameter updates
/// go through set_parameters.
class TnDistribution {
 public:
  TnDistribution(std::shared_ptr<const Supernet> supernet, RankMap ranks,
                 CoreSet parameters, ContractionLimits limits = {});

  const Supernet& supernet() const noexcept { return *supernet_; }
  std::shared_ptr<const Supernet> supernet_ptr() const noexcept {
    return supernet_;
  }
  const RankMap& ranks() const noexcept { return ranks_; }
  const ContractionLimits& limits() const noexcept { return limits_; }
  void set_limits(ContractionLimits limits) { limits_ = limits; }

  /// Raw beta parameters.
  const CoreSet& parameters() const noexcept { return parameters_; }
  /// Softmax-normalized cores.
  const CoreSet& normalized() const noexcept { return normalized_; }
  void set_parameters(CoreSet parameters);

  /// Zero-filled array set shaped like the cores.
  CoreSet zero_like() const;

  bool enumerable() const;

  double prob(const SubgraphIndex& index) const;

  /// Full table in lexicographic index order, by explicit enumeration of all
  /// node rank assignments.
  std::vector<double> materialize() const;

  /// P(i_t = . | i_1..i_{t-1} = prefix).
  std::vector<double> marginal(std::size_t edge,
                               std::span<const std::size_t> prefix) const;

  /// Unconditional marginal of a single edge.
  std::vector<double> edge_marginal(std::size_t edge) const;

  ArgmaxResult argmax() const;

  /// d log p(index) / d beta.
  CoreSet log_prob_grad(const SubgraphIndex& index) const;
  /// d p(index) / d A (normalized cores), not yet through the softmax.
  CoreSet prob_grad_normalized(const SubgraphIndex& index) const;

  struct Expectation {
    double value = 0.0;
    CoreSet gradient;
  };
  /// E[score] under the distribution and its exact beta-gradient, by
  /// enumeration of the subgraph space.
  Expectation expectation_grad(
      const std::function<double(const SubgraphIndex&)>& score) const;

  /// Backpropagates a gradient with respect to normalized cores into a
  /// gradient with respect to the raw parameters.
  CoreSet softmax_backward(const CoreSet& grad_normalized) const;

 private:
  Factor edge_factor(std::size_t edge, std::size_t choice) const;
  Contractor contractor() const;

  std::shared_ptr<const Supernet> supernet_;
  RankMap ranks_;
  CoreSet parameters_;
  CoreSet normalized_;
  ContractionLimits limits_;
};

TnDistribution init_distribution(std::shared_ptr<const Supernet> supernet,
                                 const RankMap& ranks, const InitSpec& init,
                                 std::uint64_t seed,
                                 ContractionLimits limits = {});

/// Exact ancestral sampler. Conditionals are memoized per prefix, so reuse
/// one sampler for many draws from a fixed distribution.
class AncestralSampler {
 public:
  explicit AncestralSampler(const TnDistribution& dist,
                            std::size_t max_cached_prefixes = 1u << 16);

  SubgraphIndex sample(std::mt19937_64& rng);

 private:
  const std::vector<double>& conditional(std::size_t edge,
                                         const std::vector<std::size_t>& prefix);

  const TnDistribution* dist_;
  std::size_t max_cached_;
  std::map<std::vector<std::size_t>, std::vector<double>> cache_;
  std::vector<double> scratch_;
};

SubgraphIndex sample(const TnDistribution& dist, std::mt19937_64& rng);

/// Index drawn from a cumulative-free probability vector by inversion.
std::size_t draw_categorical(std::span<const double> probs,
                             std::mt19937_64& rng);

}  // namespace tnsupernet
