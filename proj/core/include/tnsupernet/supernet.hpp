#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

namespace tnsupernet {

/// One multi-choice edge of a supernet. `u`/`v` are positions into the
/// supernet's node list; direction is metadata only.
struct Edge {
  std::size_t id = 0;  // 0-based position t
  std::size_t u = 0;
  std::size_t v = 0;
  std::vector<std::string> choices;

  std::size_t num_choices() const noexcept { return choices.size(); }
  bool is_self_loop() const noexcept { return u == v; }
};

/// Input form of an edge, endpoints named by node identifier.
struct EdgeSpec {
  std::string u;
  std::string v;
  std::vector<std::string> choices;
};

/// One choice per edge, stored 0-based. Text forms (CSV, JSON, reports) are
/// 1-based.
struct SubgraphIndex {
  std::vector<std::size_t> picks;

  std::size_t size() const noexcept { return picks.size(); }
  std::size_t operator[](std::size_t t) const { return picks[t]; }
  std::size_t& operator[](std::size_t t) { return picks[t]; }

  auto operator<=>(const SubgraphIndex&) const = default;
};

/// "(1,2,3)" with 1-based entries.
std::string to_string(const SubgraphIndex& index);
/// "1-2-3" with 1-based entries; used in CSV columns.
std::string to_compact_string(const SubgraphIndex& index);
std::ostream& operator<<(std::ostream& os, const SubgraphIndex& index);
/// Parses "1,2,3" / "1-2-3" / "(1,2,3)" (1-based).
SubgraphIndex parse_index(std::string_view text);

enum class Slot { kFirst, kSecond };

struct Incidence {
  std::size_t edge = 0;
  Slot slot = Slot::kFirst;

  bool operator==(const Incidence&) const = default;
};

using BigInt = boost::multiprecision::cpp_int;

/// Labeled multigraph whose edges carry candidate choices. Immutable once
/// constructed; the constructor validates every invariant.
class Supernet {
 public:
  Supernet(std::string name, std::vector<std::string> nodes,
           std::vector<EdgeSpec> edges);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const Edge& edge(std::size_t t) const { return edges_.at(t); }

  std::optional<std::size_t> node_index(std::string_view id) const;

  /// Every (edge, slot) touching node `n`, in edge order; self-loops list
  /// both slots.
  std::vector<Incidence> incident_edges(std::string_view node) const;
  std::vector<Incidence> incident_edges(std::size_t node) const;

  /// Product of choice counts.
  BigInt space_size() const;
  /// Space size if it does not exceed `cap`.
  std::optional<std::uint64_t> space_size_within(std::uint64_t cap) const;

  /// Throws DataError unless `index` has one in-range pick per edge.
  void validate(const SubgraphIndex& index) const;

  /// Row-major (lexicographic) rank of `index` in the subgraph space.
  std::uint64_t linear_index(const SubgraphIndex& index) const;
  SubgraphIndex index_at(std::uint64_t linear) const;

  /// Stable 64-bit digest of the canonical JSON form.
  std::uint64_t hash() const;

  bool operator==(const Supernet& other) const;

 private:
  std::string name_;
  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> node_lookup_;
};

/// All-first-choice index.
SubgraphIndex first_index(const Supernet& s);

/// Lexicographic successor; returns false after the last index.
bool next_index(const Supernet& s, SubgraphIndex& index);

/// Calls `fn` on every index in lexicographic order. Throws CapExceeded when
/// the space is larger than `cap`.
void for_each_index(const Supernet& s, std::uint64_t cap,
                    const std::function<void(const SubgraphIndex&)>& fn);

std::vector<SubgraphIndex> enumerate_indices(const Supernet& s,
                                             std::uint64_t cap);

Supernet load_supernet(std::string_view document);
Supernet load_supernet_file(const std::string& path);
nlohmann::json to_json(const Supernet& s);
Supernet supernet_from_json(const nlohmann::json& doc);

/// Canned topologies used by the tests, the self-check and synthetic tasks.
/// Choice labels are "op1".."opC".
Supernet make_chain(std::size_t edges, std::size_t choices);
Supernet make_ring(std::size_t edges, std::size_t choices);
Supernet make_star(std::size_t edges, std::size_t choices);
Supernet make_chain(const std::vector<std::vector<std::string>>& choices,
                    std::string name = "chain");

/// FNV-1a over bytes.
std::uint64_t fnv1a(std::string_view bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace tnsupernet
