#pragma once

// Brute-force reference computations used only by tests. They share no code
// path with the library's contraction, softmax or sparse propagation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tnsupernet/relational.hpp"
#include "tnsupernet/tn_distribution.hpp"

namespace tnsupernet::oracle {

inline std::vector<double> softmax_slice(const EdgeCore& beta, std::size_t r, std::size_t r2) {
  std::vector<double> out(beta.choices);
  double hi = beta.at(r, 0, r2);
  for (std::size_t i = 1; i < beta.choices; ++i) hi = std::max(hi, beta.at(r, i, r2));
  double z = 0.0;
  for (std::size_t i = 0; i < beta.choices; ++i) z += out[i] = std::exp(beta.at(r, i, r2) - hi);
  for (auto& x : out) x /= z;
  return out;
}

/// p(idx) by explicit summation over every node rank assignment.
inline double prob(const Supernet& s, const std::vector<std::size_t>& ranks,
                   const CoreSet& beta, const SubgraphIndex& idx) {
  const std::size_t m = s.num_nodes();
  std::vector<std::size_t> r(m, 0);
  double total = 0.0;
  double z = 1.0;
  for (auto x : ranks) z *= static_cast<double>(x);
  while (true) {
    double prod = 1.0;
    for (std::size_t t = 0; t < s.num_edges(); ++t) {
      const auto& e = s.edge(t);
      prod *= softmax_slice(beta[t], r[e.u], r[e.v])[idx[t]];
    }
    total += prod;
    std::size_t n = m;
    while (n-- > 0) {
      if (++r[n] < ranks[n]) break;
      r[n] = 0;
    }
    if (n == static_cast<std::size_t>(-1)) break;
  }
  return total / z;
}

/// Whole table through `prob`.
inline std::vector<double> table(const TnDistribution& d) {
  std::vector<double> out;
  auto idx = first_index(d.supernet());
  do {
    out.push_back(prob(d.supernet(), d.ranks().values(), d.parameters(), idx));
  } while (next_index(d.supernet(), idx));
  return out;
}

using Dense = std::vector<std::vector<double>>;

inline Dense dense_adjacency(const RelationalGraph& g, std::size_t rel) {
  const std::size_t n = g.num_entities();
  Dense a(n, std::vector<double>(n, 0.0));
  if (rel == kIdentityRelation) {
    for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
    return a;
  }
  for (const auto& tr : g.triples) {
    if (tr.relation == rel) a[tr.head][tr.tail] = 1.0;
  }
  return a;
}

inline Dense matmul(const Dense& a, const Dense& b) {
  const std::size_t n = a.size();
  Dense c(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (a[i][k] != 0.0)
        for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Dense chain_product(const RelationalGraph& g, const std::vector<std::size_t>& rels) {
  Dense m = dense_adjacency(g, kIdentityRelation);
  for (auto r : rels) m = matmul(m, dense_adjacency(g, r));
  return m;
}

/// sum_idx p(idx) * sum_{(x,y)} path_count(idx)(x,y), by enumeration.
inline double relaxed_value(const RelationalGraph& g, const ChainTask& task,
                            const TnDistribution& d) {
  const auto probs = table(d);
  double total = 0.0;
  auto idx = first_index(d.supernet());
  std::size_t k = 0;
  std::vector<EntityPair> pairs = task.train;
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  do {
    std::vector<std::size_t> rels;
    for (auto p : idx.picks) rels.push_back(task.candidates[p]);
    const auto m = chain_product(g, rels);
    double s = 0.0;
    for (auto [x, y] : pairs) s += m[x][y];
    total += probs[k++] * s;
  } while (next_index(d.supernet(), idx));
  return total;
}

}  // namespace tnsupernet::oracle
