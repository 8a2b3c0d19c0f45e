#include "tnsupernet/tn_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tnsupernet/errors.hpp"

namespace tnsupernet {

RankMap::RankMap(std::vector<std::size_t> ranks) : ranks_(std::move(ranks)) {
  for (std::size_t n = 0; n < ranks_.size(); ++n) {
    if (ranks_[n] == 0) {
      throw ConfigError("ranks", "rank of node #" + std::to_string(n) +
                                     " must be at least 1");
    }
  }
}

RankMap RankMap::uniform(const Supernet& s, std::size_t rank) {
  return RankMap(std::vector<std::size_t>(s.num_nodes(), rank));
}

RankMap RankMap::from_json(const Supernet& s, const nlohmann::json& doc,
                           std::size_t fallback) {
  std::vector<std::size_t> ranks(s.num_nodes(), fallback);
  if (doc.is_number_unsigned() || doc.is_number_integer()) {
    ranks.assign(s.num_nodes(), doc.get<std::size_t>());
  } else if (doc.is_object()) {
    for (const auto& [node, value] : doc.items()) {
      auto n = s.node_index(node);
      if (!n) throw ConfigError("ranks", "unknown node '" + node + "' in ranks");
      ranks[*n] = value.get<std::size_t>();
    }
  } else if (!doc.is_null()) {
    throw ConfigError("ranks", "ranks must be an integer or a node->rank map");
  }
  return RankMap(std::move(ranks));
}

double RankMap::product() const {
  double p = 1.0;
  for (auto r : ranks_) p *= static_cast<double>(r);
  return p;
}

std::optional<std::uint64_t> RankMap::product_within(std::uint64_t cap) const {
  std::uint64_t p = 1;
  for (auto r : ranks_) {
    if (p > cap / r) return std::nullopt;
    p *= r;
  }
  return p;
}

EdgeCore::EdgeCore(std::size_t edge_id, std::size_t left,
                   std::size_t num_choices, std::size_t right, double fill)
    : edge(edge_id),
      left_rank(left),
      choices(num_choices),
      right_rank(right),
      values(left * num_choices * right, fill) {}

EdgeCore normalized_core(const EdgeCore& core) {
  EdgeCore out = core;
  for (std::size_t r = 0; r < core.left_rank; ++r) {
    for (std::size_t r2 = 0; r2 < core.right_rank; ++r2) {
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < core.choices; ++i) {
        hi = std::max(hi, core.at(r, i, r2));
      }
      double total = 0.0;
      for (std::size_t i = 0; i < core.choices; ++i) {
        const double e = std::exp(core.at(r, i, r2) - hi);
        out.at(r, i, r2) = e;
        total += e;
      }
      for (std::size_t i = 0; i < core.choices; ++i) out.at(r, i, r2) /= total;
    }
  }
  return out;
}

TnDistribution::TnDistribution(std::shared_ptr<const Supernet> supernet,
                               RankMap ranks, CoreSet parameters,
                               ContractionLimits limits)
    : supernet_(std::move(supernet)), ranks_(std::move(ranks)), limits_(limits) {
  if (!supernet_) throw ConfigError("supernet", "null supernet");
  if (ranks_.size() != supernet_->num_nodes()) {
    throw ConfigError("ranks", "rank map covers " +
                                   std::to_string(ranks_.size()) +
                                   " nodes, supernet has " +
                                   std::to_string(supernet_->num_nodes()));
  }
  set_parameters(std::move(parameters));
}

void TnDistribution::set_parameters(CoreSet parameters) {
  const auto& s = *supernet_;
  if (parameters.size() != s.num_edges()) {
    throw ConfigError("cores", "expected " + std::to_string(s.num_edges()) +
                                   " cores, got " +
                                   std::to_string(parameters.size()));
  }
  for (std::size_t t = 0; t < parameters.size(); ++t) {
    const auto& e = s.edge(t);
    const auto& c = parameters[t];
    if (c.left_rank != ranks_[e.u] || c.right_rank != ranks_[e.v] ||
        c.choices != e.num_choices() || c.values.size() != c.left_rank * c.choices * c.right_rank) {
      throw ConfigError("cores", "core " + std::to_string(t + 1) +
                                     " shape does not match ranks and choices");
    }
    for (double x : c.values) {
      if (!std::isfinite(x)) {
        throw NumericalError("core " + std::to_string(t + 1) +
                             " has a non-finite entry");
      }
    }
  }
  parameters_ = std::move(parameters);
  normalized_.clear();
  normalized_.reserve(parameters_.size());
  for (const auto& c : parameters_) normalized_.push_back(normalized_core(c));
}

CoreSet TnDistribution::zero_like() const {
  CoreSet out;
  out.reserve(parameters_.size());
  for (const auto& c : parameters_) {
    out.emplace_back(c.edge, c.left_rank, c.choices, c.right_rank, 0.0);
  }
  return out;
}

bool TnDistribution::enumerable() const {
  return supernet_->space_size_within(limits_.enumeration_cap).has_value();
}

Contractor TnDistribution::contractor() const {
  return Contractor(ranks_.values(), limits_.factor_cap);
}

Factor TnDistribution::edge_factor(std::size_t edge, std::size_t choice) const {
  const auto& e = supernet_->edge(edge);
  const auto& a = normalized_[edge];
  Factor f;
  if (e.is_self_loop()) {
    f.vars = {e.u};
    f.values.resize(a.left_rank);
    for (std::size_t r = 0; r < a.left_rank; ++r) f.values[r] = a.at(r, choice, r);
    return f;
  }
  const std::size_t ru = a.left_rank;
  const std::size_t rv = a.right_rank;
  f.values.resize(ru * rv);
  if (e.u < e.v) {
    f.vars = {e.u, e.v};
    for (std::size_t r = 0; r < ru; ++r)
      for (std::size_t r2 = 0; r2 < rv; ++r2)
        f.values[r * rv + r2] = a.at(r, choice, r2);
  } else {
    f.vars = {e.v, e.u};
    for (std::size_t r = 0; r < ru; ++r)
      for (std::size_t r2 = 0; r2 < rv; ++r2)
        f.values[r2 * ru + r] = a.at(r, choice, r2);
  }
  return f;
}

namespace {

// Value of a two-slot environment factor at (r_u, r_v), or the diagonal
// entry for self-loops.
double env_at(const Factor& env, const Edge& e, std::size_t ru_dim,
              std::size_t rv_dim, std::size_t r, std::size_t r2) {
  if (e.is_self_loop()) return r == r2 ? env.values[r] : 0.0;
  if (e.u < e.v) return env.values[r * rv_dim + r2];
  return env.values[r2 * ru_dim + r];
}

}  // namespace

double TnDistribution::prob(const SubgraphIndex& index) const {
  supernet_->validate(index);
  std::vector<Factor> factors;
  factors.reserve(index.size());
  for (std::size_t t = 0; t < index.size(); ++t) {
    factors.push_back(edge_factor(t, index[t]));
  }
  return contractor().contract_all(std::move(factors)) / ranks_.product();
}

std::vector<double> TnDistribution::materialize() const {
  const auto& s = *supernet_;
  auto space = s.space_size_within(limits_.enumeration_cap);
  if (!space) {
    throw CapExceeded("materialize: subgraph space exceeds enumeration cap");
  }
  if (!ranks_.product_within(limits_.rank_assignment_cap)) {
    throw CapExceeded("materialize: rank assignments exceed cap");
  }
  const std::size_t m = s.num_nodes();
  const std::size_t T = s.num_edges();
  std::vector<double> table(*space, 0.0);
  std::vector<std::size_t> assign(m, 0);
  std::vector<double> outer{1.0};
  std::vector<double> next;
  while (true) {
    outer.assign(1, 1.0);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& e = s.edge(t);
      const auto& a = normalized_[t];
      next.resize(outer.size() * a.choices);
      for (std::size_t j = 0; j < outer.size(); ++j)
        for (std::size_t i = 0; i < a.choices; ++i)
          next[j * a.choices + i] = outer[j] * a.at(assign[e.u], i, assign[e.v]);
      outer.swap(next);
    }
    for (std::size_t j = 0; j < table.size(); ++j) table[j] += outer[j];

    std::size_t n = m;
    while (n-- > 0) {
      if (++assign[n] < ranks_[n]) break;
      assign[n] = 0;
    }
    if (n == static_cast<std::size_t>(-1)) break;
  }
  const double z = ranks_.product();
  for (auto& x : table) x /= z;
  return table;
}

std::vector<double> TnDistribution::marginal(
    std::size_t edge, std::span<const std::size_t> prefix) const {
  const auto& s = *supernet_;
  if (edge >= s.num_edges()) throw DataError("marginal: edge out of range");
  if (prefix.size() != edge) {
    throw DataError("marginal: conditioning must assign exactly the edges "
                    "before edge " + std::to_string(edge + 1));
  }
  std::vector<Factor> factors;
  factors.reserve(edge);
  for (std::size_t t = 0; t < edge; ++t) {
    if (prefix[t] >= s.edge(t).num_choices()) {
      throw DataError("marginal: conditioning choice out of range on edge " +
                      std::to_string(t + 1));
    }
    factors.push_back(edge_factor(t, prefix[t]));
  }
  const auto& e = s.edge(edge);
  const auto& a = normalized_[edge];
  // Later edges are summed over their choices, and each normalized slice
  // sums to one, so they drop out of the contraction.
  Factor env = contractor().contract(std::move(factors), {e.u, e.v});
  std::vector<double> out(a.choices, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < a.choices; ++i) {
    double z = 0.0;
    for (std::size_t r = 0; r < a.left_rank; ++r)
      for (std::size_t r2 = 0; r2 < a.right_rank; ++r2) {
        if (e.is_self_loop() && r != r2) continue;
        z += env_at(env, e, a.left_rank, a.right_rank, r, r2) * a.at(r, i, r2);
      }
    out[i] = z;
    total += z;
  }
  for (auto& x : out) x /= total;
  return out;
}

std::vector<double> TnDistribution::edge_marginal(std::size_t edge) const {
  const auto& e = supernet_->edge(edge);
  const auto& a = normalized_.at(edge);
  std::vector<double> out(a.choices, 0.0);
  for (std::size_t i = 0; i < a.choices; ++i) {
    if (e.is_self_loop()) {
      for (std::size_t r = 0; r < a.left_rank; ++r) out[i] += a.at(r, i, r);
      out[i] /= static_cast<double>(a.left_rank);
    } else {
      for (std::size_t r = 0; r < a.left_rank; ++r)
        for (std::size_t r2 = 0; r2 < a.right_rank; ++r2) out[i] += a.at(r, i, r2);
      out[i] /= static_cast<double>(a.left_rank * a.right_rank);
    }
  }
  return out;
}

ArgmaxResult TnDistribution::argmax() const {
  const auto& s = *supernet_;
  ArgmaxResult best;
  if (enumerable()) {
    best.probability = -1.0;
    auto index = first_index(s);
    do {
      const double p = prob(index);
      if (p > best.probability) {
        best.probability = p;
        best.index = index;
      }
    } while (next_index(s, index));
    best.exact = true;
    return best;
  }
  // Greedy sequential mode selection.
  best.index.picks.reserve(s.num_edges());
  for (std::size_t t = 0; t < s.num_edges(); ++t) {
    auto probs = marginal(t, best.index.picks);
    auto it = std::max_element(probs.begin(), probs.end());
    best.index.picks.push_back(static_cast<std::size_t>(it - probs.begin()));
  }
  best.probability = prob(best.index);
  best.exact = false;
  return best;
}

CoreSet TnDistribution::prob_grad_normalized(const SubgraphIndex& index) const {
  const auto& s = *supernet_;
  s.validate(index);
  const std::size_t T = s.num_edges();
  std::vector<Factor> all;
  all.reserve(T);
  for (std::size_t t = 0; t < T; ++t) all.push_back(edge_factor(t, index[t]));

  const Contractor con = contractor();
  const double z = ranks_.product();
  CoreSet grad = zero_like();
  for (std::size_t t = 0; t < T; ++t) {
    const auto& e = s.edge(t);
    std::vector<Factor> others;
    others.reserve(T - 1);
    for (std::size_t k = 0; k < T; ++k) {
      if (k != t) others.push_back(all[k]);
    }
    Factor env = con.contract(std::move(others), {e.u, e.v});
    auto& g = grad[t];
    for (std::size_t r = 0; r < g.left_rank; ++r)
      for (std::size_t r2 = 0; r2 < g.right_rank; ++r2)
        g.at(r, index[t], r2) =
            env_at(env, e, g.left_rank, g.right_rank, r, r2) / z;
  }
  return grad;
}

CoreSet TnDistribution::softmax_backward(const CoreSet& grad_normalized) const {
  CoreSet out = zero_like();
  for (std::size_t t = 0; t < out.size(); ++t) {
    const auto& a = normalized_[t];
    const auto& g = grad_normalized[t];
    auto& o = out[t];
    for (std::size_t r = 0; r < a.left_rank; ++r)
      for (std::size_t r2 = 0; r2 < a.right_rank; ++r2) {
        double dot = 0.0;
        for (std::size_t i = 0; i < a.choices; ++i) dot += a.at(r, i, r2) * g.at(r, i, r2);
        for (std::size_t i = 0; i < a.choices; ++i)
          o.at(r, i, r2) = a.at(r, i, r2) * (g.at(r, i, r2) - dot);
      }
  }
  return out;
}

CoreSet TnDistribution::log_prob_grad(const SubgraphIndex& index) const {
  CoreSet g = prob_grad_normalized(index);
  // p is linear in the normalized core of edge 0: p = <A_0, dp/dA_0>.
  const auto& a0 = normalized_[0];
  double p = 0.0;
  for (std::size_t k = 0; k < a0.values.size(); ++k) p += a0.values[k] * g[0].values[k];
  for (auto& core : g)
    for (auto& x : core.values) x /= p;
  return softmax_backward(g);
}

TnDistribution::Expectation TnDistribution::expectation_grad(
    const std::function<double(const SubgraphIndex&)>& score) const {
  const auto& s = *supernet_;
  if (!enumerable()) {
    throw CapExceeded("expectation_grad: subgraph space exceeds enumeration cap");
  }
  Expectation out;
  CoreSet acc = zero_like();
  const auto& a0 = normalized_[0];
  auto index = first_index(s);
  do {
    const double value = score(index);
    CoreSet g = prob_grad_normalized(index);
    double p = 0.0;
    for (std::size_t k = 0; k < a0.values.size(); ++k) p += a0.values[k] * g[0].values[k];
    out.value += p * value;
    if (value != 0.0) {
      for (std::size_t t = 0; t < acc.size(); ++t)
        for (std::size_t k = 0; k < acc[t].values.size(); ++k)
          acc[t].values[k] += value * g[t].values[k];
    }
  } while (next_index(s, index));
  out.gradient = softmax_backward(acc);
  return out;
}

TnDistribution init_distribution(std::shared_ptr<const Supernet> supernet,
                                 const RankMap& ranks, const InitSpec& init,
                                 std::uint64_t seed, ContractionLimits limits) {
  if (!supernet) throw ConfigError("supernet", "null supernet");
  if (ranks.size() != supernet->num_nodes()) {
    throw ConfigError("ranks", "rank map does not cover every supernet node");
  }
  if (init.kind == InitSpec::Kind::kGaussian && !(init.stddev >= 0.0)) {
    throw ConfigError("init_sd", "initialization standard deviation must be >= 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, init.stddev);
  CoreSet cores;
  cores.reserve(supernet->num_edges());
  for (const auto& e : supernet->edges()) {
    EdgeCore c(e.id, ranks[e.u], e.num_choices(), ranks[e.v]);
    if (init.kind == InitSpec::Kind::kGaussian && init.stddev > 0.0) {
      for (auto& x : c.values) x = normal(rng);
    }
    cores.push_back(std::move(c));
  }
  return TnDistribution(std::move(supernet), ranks, std::move(cores), limits);
}

std::size_t draw_categorical(std::span<const double> probs,
                             std::mt19937_64& rng) {
  const double u = std::generate_canonical<double, 53>(rng);
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

AncestralSampler::AncestralSampler(const TnDistribution& dist,
                                   std::size_t max_cached_prefixes)
    : dist_(&dist), max_cached_(max_cached_prefixes) {}

const std::vector<double>& AncestralSampler::conditional(
    std::size_t edge, const std::vector<std::size_t>& prefix) {
  auto it = cache_.find(prefix);
  if (it != cache_.end()) return it->second;
  auto probs = dist_->marginal(edge, prefix);
  if (cache_.size() < max_cached_) {
    return cache_.emplace(prefix, std::move(probs)).first->second;
  }
  scratch_ = std::move(probs);
  return scratch_;
}

SubgraphIndex AncestralSampler::sample(std::mt19937_64& rng) {
  const std::size_t T = dist_->supernet().num_edges();
  std::vector<std::size_t> prefix;
  prefix.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& probs = conditional(t, prefix);
    prefix.push_back(draw_categorical(probs, rng));
  }
  return SubgraphIndex{std::move(prefix)};
}

SubgraphIndex sample(const TnDistribution& dist, std::mt19937_64& rng) {
  AncestralSampler sampler(dist, 0);
  return sampler.sample(rng);
}

}  // namespace tnsupernet
