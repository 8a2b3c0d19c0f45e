#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tnsupernet {

/// Dense factor over a sorted set of node variables. Values are row-major
/// with the first variable slowest.
struct Factor {
  std::vector<std::size_t> vars;
  std::vector<double> values;
};

/// Sums products of node-indexed factors by variable elimination.
///
/// Elimination order is greedy: at each step the variable whose elimination
/// yields the smallest intermediate factor goes first, ties broken by the
/// lower node index. Any intermediate larger than `factor_cap` entries
/// raises CapExceeded.
class Contractor {
 public:
  Contractor(std::span<const std::size_t> ranks, std::uint64_t factor_cap);

  /// Contracts `factors`, summing every variable not listed in `keep`.
  /// Variables touched by no factor contribute a multiplicity of their rank
  /// when summed, or broadcast when kept. The result is over `keep` sorted
  /// ascending.
  Factor contract(std::vector<Factor> factors,
                  std::vector<std::size_t> keep) const;

  /// Full contraction to a scalar.
  double contract_all(std::vector<Factor> factors) const;

  std::size_t rank(std::size_t node) const { return ranks_[node]; }

 private:
  Factor multiply(std::span<const Factor* const> factors,
                  const std::vector<std::size_t>& out_vars,
                  std::size_t eliminated, bool has_eliminated) const;

  std::vector<std::size_t> ranks_;
  std::uint64_t factor_cap_;
};

}  // namespace tnsupernet
