#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tnsupernet/search.hpp"

namespace tnsupernet {

/// Name <-> dense id, ids assigned by first appearance.
class Vocabulary {
 public:
  std::size_t intern(const std::string& name);
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t id(const std::string& name) const;
  const std::string& name(std::size_t id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// 0/1 sparse matrix in compressed-row form, with its transpose kept for
/// column access.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t n, std::vector<std::pair<std::uint32_t, std::uint32_t>> entries);

  std::size_t dim() const noexcept { return n_; }
  std::size_t nonzeros() const noexcept { return cols_.size(); }
  bool contains(std::size_t row, std::size_t col) const;
  std::span<const std::uint32_t> row(std::size_t r) const;
  std::span<const std::uint32_t> column(std::size_t c) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> cols_;
  std::vector<std::size_t> col_ptr_;
  std::vector<std::uint32_t> rows_;
};

struct Triple {
  std::size_t head = 0;
  std::size_t relation = 0;
  std::size_t tail = 0;

  auto operator<=>(const Triple&) const = default;
};

/// Multi-relational graph: one adjacency matrix per relation (or, for a
/// heterogeneous network, per edge type).
struct RelationalGraph {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> triples;
  std::vector<SparseMatrix> adjacency;

  std::size_t num_entities() const noexcept { return entities.size(); }
  /// Rebuilds the adjacency matrices from `triples` (deduplicated).
  void build();
};

/// Parses `head<TAB>relation<TAB>tail` lines into `graph`'s vocabularies and
/// returns the parsed triples (duplicates removed). Does not rebuild.
std::vector<Triple> read_triples(std::string_view text, RelationalGraph& graph,
                                 const std::string& source);

RelationalGraph load_triples(const std::string& path);

/// A dataset directory with train.txt, valid.txt, test.txt (and optionally
/// facts.txt). The graph holds facts + train; valid/test are held out.
struct KgDataset {
  RelationalGraph graph;
  std::vector<Triple> facts;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
};

KgDataset load_dataset(const std::string& dir);
void write_dataset(const std::string& dir, const KgDataset& data);

/// Candidate id reserved for the identity (no-op) relation.
inline constexpr std::size_t kIdentityRelation = static_cast<std::size_t>(-1);

using EntityPair = std::pair<std::size_t, std::size_t>;

struct ChainTask {
  std::size_t target = 0;
  std::size_t chain_length = 2;
  /// Relation ids per chain position; kIdentityRelation for the no-op.
  std::vector<std::size_t> candidates;
  std::vector<EntityPair> train;
  std::vector<EntityPair> valid;
  std::vector<EntityPair> test;
};

struct ChainTaskOptions {
  std::size_t chain_length = 2;
  bool include_identity = false;
  bool include_target = false;
};

ChainTask make_chain_task(const KgDataset& data, const std::string& target,
                          const ChainTaskOptions& options = {});

/// Chain supernet whose edge t chooses among the task's candidate relations.
Supernet chain_supernet(const RelationalGraph& g, const ChainTask& task);

struct ChainRule {
  std::vector<std::size_t> relations;
  double score = 0.0;
};

ChainRule rule_from_index(const ChainTask& task, const SubgraphIndex& idx,
                          double score = 0.0);
/// `target(C,A) <= r1(C,B1), r2(B1,A) [prob=p]`
std::string format_rule(const RelationalGraph& g, const ChainTask& task,
                        const ChainRule& rule);
nlohmann::json rule_to_json(const RelationalGraph& g, const ChainTask& task,
                            const ChainRule& rule);

/// Real-valued path counts from `x` along the chain: row x of the product
/// of the rule's adjacency matrices, as a dense vector over entities.
std::vector<double> chain_row(const RelationalGraph& g,
                              std::span<const std::size_t> relations,
                              std::size_t x);

/// Number of pairs in `pairs` connected by at least one path along the rule.
double hard_measure(const RelationalGraph& g, std::span<const std::size_t> relations,
                    std::span<const EntityPair> pairs);

struct RelaxedOptions {
  /// Clamp each pair's expected path count at 1 before summing.
  bool clamp = false;
};

struct RelaxedStats {
  /// Largest sparse intermediate row vector, in stored entries.
  std::size_t max_intermediate_entries = 0;
};

/// Expected path count sum_{(x,y)} v_x^T M v_y with M the distribution-mixed
/// chain product, computed by sparse row propagation through per-edge
/// message blocks, with its exact gradient.
ObjectiveValue relaxed_chain_objective(const RelationalGraph& g,
                                       const ChainTask& task,
                                       const TnDistribution& dist,
                                       const RelaxedOptions& options = {},
                                       RelaxedStats* stats = nullptr);

/// Row x of the mixed chain product M.
std::vector<double> relaxed_row(const RelationalGraph& g, const ChainTask& task,
                                const TnDistribution& dist, std::size_t x);

struct RankMetrics {
  double mrr = 0.0;
  std::map<std::size_t, double> hits;
  std::size_t queries = 0;
};

using RowScorer = std::function<std::vector<double>(std::size_t head)>;

/// Ranks each query's true tail among all entities by `scorer`'s row.
/// With `filtered`, other known tails in `known` are removed from the
/// ranking. Ties rank the true tail last.
RankMetrics rank_metrics(std::size_t num_entities, const RowScorer& scorer,
                         std::span<const EntityPair> queries,
                         std::span<const EntityPair> known,
                         const std::vector<std::size_t>& k_list = {1, 3, 10},
                         bool filtered = true);

/// Top-k chains by probability, descending, lexicographic tie-break.
/// Enumerates when feasible, beam search otherwise.
std::vector<ChainRule> extract_top_rules(const TnDistribution& dist,
                                         const ChainTask& task, std::size_t k);

struct PlantedKgSpec {
  std::size_t num_entities = 60;
  std::size_t num_relations = 6;
  /// Planted chain over base relation ids.
  std::vector<std::size_t> rule{0, 1};
  /// Out-degree of every entity in every base relation.
  std::size_t out_degree = 2;
  /// Fraction of chain-reachable pairs kept as target facts.
  double coverage = 1.0;
  /// Fraction of target facts replaced by random pairs.
  double noise = 0.0;
  std::uint64_t seed = 0;
};

struct PlantedKg {
  KgDataset data;
  ChainTask task;
};

/// Random base relations r1..rN plus a "target" relation generated from the
/// planted chain; target facts are split 70/10/20 into train/valid/test.
PlantedKg generate_planted_kg(const PlantedKgSpec& spec,
                              const ChainTaskOptions& options = {});

/// Search adapter: reward = hard measure on the train split; relaxed
/// objective = expected path count; final score = filtered test MRR.
class ChainEvaluator final : public TaskEvaluator {
 public:
  ChainEvaluator(std::shared_ptr<const KgDataset> data, ChainTask task,
                 RelaxedOptions options = {}, bool filtered = true);

  double evaluate(const SubgraphIndex& index) const override;
  std::optional<double> final_evaluate(const SubgraphIndex& index) const override;
  bool has_relaxed_objective() const override { return true; }
  ObjectiveValue relaxed_objective(const TnDistribution& dist) const override;

  const ChainTask& task() const noexcept { return task_; }
  const KgDataset& data() const noexcept { return *data_; }
  /// All known (head, tail) pairs of the target across splits.
  const std::vector<EntityPair>& known_pairs() const noexcept { return known_; }
  RankMetrics test_metrics(std::span<const std::size_t> relations) const;

 private:
  std::shared_ptr<const KgDataset> data_;
  ChainTask task_;
  RelaxedOptions options_;
  bool filtered_ = true;
  std::vector<EntityPair> known_;
};

}  // namespace tnsupernet
