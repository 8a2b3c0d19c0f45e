#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tnsupernet/search.hpp"

namespace tnsupernet {

/// Complete lookup table of validation and test scores over a subgraph
/// space. Scores are stored in lexicographic index order.
struct TabularBenchmark {
  std::shared_ptr<const Supernet> supernet;
  std::vector<double> val_score;
  std::vector<double> test_score;
  std::string name;
  std::string source;

  double val(const SubgraphIndex& idx) const;
  double test(const SubgraphIndex& idx) const;

  /// Largest test score over the table.
  double best_test() const;
  /// best_test() - test(idx).
  double regret(const SubgraphIndex& idx) const;
};

struct SyntheticSpec {
  std::shared_ptr<const Supernet> supernet;
  SubgraphIndex planted;
  double gap = 0.3;
  double noise_sd = 0.0;
  /// Bonus per node-sharing edge pair whose picks coincide; 0 = independent.
  double pairwise_strength = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t enumeration_cap = 1'000'000;
};

/// Base scores uniform on [0, 0.5), plus the pairwise bonus, plus Gaussian
/// noise drawn once (independently for val and test). The planted index is
/// then lifted to the maximum of the rest plus `gap` in both tables.
TabularBenchmark generate_synthetic(const SyntheticSpec& spec);

/// Header `i_1,...,i_T,val,test`, 1-based choice indices. Without a
/// supernet, a chain with C_t = the largest value seen in column t is used.
TabularBenchmark load_benchmark_csv(
    const std::string& path,
    std::shared_ptr<const Supernet> supernet = nullptr);
TabularBenchmark parse_benchmark_csv(
    std::string_view text, std::shared_ptr<const Supernet> supernet = nullptr,
    std::string source = "<memory>");
std::string benchmark_csv(const TabularBenchmark& b);

/// Table-lookup evaluator. Counts reads of each table so tests can check
/// that search touches only validation scores.
class TabularEvaluator final : public TaskEvaluator {
 public:
  explicit TabularEvaluator(std::shared_ptr<const TabularBenchmark> bench);

  double evaluate(const SubgraphIndex& index) const override;
  std::optional<double> final_evaluate(const SubgraphIndex& index) const override;
  bool has_relaxed_objective() const override { return true; }
  ObjectiveValue relaxed_objective(const TnDistribution& dist) const override;

  std::size_t val_reads() const noexcept { return val_reads_.load(); }
  std::size_t test_reads() const noexcept { return test_reads_.load(); }
  const TabularBenchmark& benchmark() const noexcept { return *bench_; }

 private:
  std::shared_ptr<const TabularBenchmark> bench_;
  mutable std::atomic<std::size_t> val_reads_{0};
  mutable std::atomic<std::size_t> test_reads_{0};
};

}  // namespace tnsupernet
