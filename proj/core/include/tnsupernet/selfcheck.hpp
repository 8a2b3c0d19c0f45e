#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tnsupernet/tn_distribution.hpp"

namespace tnsupernet {

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct SelfCheckOptions {
  std::size_t rank = 2;
  std::uint64_t seed = 0;
  double init_sd = 1.0;
  std::size_t fd_coordinates = 100;
  double fd_step = 1e-5;
  /// Negative control: perturbs analytic gradients before comparison.
  bool corrupt_gradient = false;
};

/// Relative error with the denominator floored at 1e-4, so that vanishing
/// gradient entries are judged on absolute error.
double gradient_relative_error(double analytic, double numeric);

/// Normalization, positivity, rank-1 factorization and finite-difference
/// gradient checks on a randomly initialized distribution.
std::vector<CheckResult> self_check(std::shared_ptr<const Supernet> supernet,
                                    const SelfCheckOptions& options);

}  // namespace tnsupernet
