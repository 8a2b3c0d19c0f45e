#include "tnsupernet/supernet.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "tnsupernet/errors.hpp"

namespace tnsupernet {

namespace {

std::string join_picks(const SubgraphIndex& index, char sep) {
  std::string out;
  for (std::size_t t = 0; t < index.size(); ++t) {
    if (t != 0) out.push_back(sep);
    out += std::to_string(index[t] + 1);
  }
  return out;
}

std::vector<std::string> numbered(std::string_view prefix, std::size_t count) {
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    out.push_back(std::string(prefix) + std::to_string(i));
  }
  return out;
}

}  // namespace

std::string to_string(const SubgraphIndex& index) {
  return "(" + join_picks(index, ',') + ")";
}

std::ostream& operator<<(std::ostream& os, const SubgraphIndex& index) {
  return os << to_string(index);
}

std::string to_compact_string(const SubgraphIndex& index) {
  return join_picks(index, '-');
}

SubgraphIndex parse_index(std::string_view text) {
  SubgraphIndex out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char c = text[pos];
    if (c == '(' || c == ')' || c == ',' || c == '-' || c == ' ') {
      ++pos;
      continue;
    }
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos,
                                     text.data() + text.size(), value);
    if (ec != std::errc() || value == 0) {
      throw DataError("malformed subgraph index '" + std::string(text) + "'");
    }
    out.picks.push_back(value - 1);
    pos = static_cast<std::size_t>(ptr - text.data());
  }
  if (out.picks.empty()) {
    throw DataError("empty subgraph index");
  }
  return out;
}

Supernet::Supernet(std::string name, std::vector<std::string> nodes,
                   std::vector<EdgeSpec> edges)
    : name_(std::move(name)), nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw DataError("supernet has no nodes");
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    if (!node_lookup_.emplace(nodes_[n], n).second) {
      throw DataError("duplicate node '" + nodes_[n] + "'");
    }
  }
  if (edges.empty()) throw DataError("supernet has no edges");
  edges_.reserve(edges.size());
  for (std::size_t t = 0; t < edges.size(); ++t) {
    auto& spec = edges[t];
    const std::string where = "edge " + std::to_string(t + 1);
    auto u = node_index(spec.u);
    if (!u) throw DataError(where + ": unknown endpoint '" + spec.u + "'");
    auto v = node_index(spec.v);
    if (!v) throw DataError(where + ": unknown endpoint '" + spec.v + "'");
    if (spec.choices.empty()) throw DataError(where + ": empty choice list");
    std::set<std::string> seen;
    for (const auto& label : spec.choices) {
      if (!seen.insert(label).second) {
        throw DataError(where + ": duplicate choice '" + label + "'");
      }
    }
    edges_.push_back(Edge{t, *u, *v, std::move(spec.choices)});
  }
}

std::optional<std::size_t> Supernet::node_index(std::string_view id) const {
  auto it = node_lookup_.find(std::string(id));
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<Incidence> Supernet::incident_edges(std::string_view node) const {
  auto n = node_index(node);
  if (!n) throw DataError("unknown node '" + std::string(node) + "'");
  return incident_edges(*n);
}

std::vector<Incidence> Supernet::incident_edges(std::size_t node) const {
  if (node >= nodes_.size()) {
    throw DataError("unknown node #" + std::to_string(node));
  }
  std::vector<Incidence> out;
  for (const auto& e : edges_) {
    if (e.u == node) out.push_back({e.id, Slot::kFirst});
    if (e.v == node) out.push_back({e.id, Slot::kSecond});
  }
  return out;
}

BigInt Supernet::space_size() const {
  BigInt size = 1;
  for (const auto& e : edges_) size *= e.num_choices();
  return size;
}

std::optional<std::uint64_t> Supernet::space_size_within(
    std::uint64_t cap) const {
  std::uint64_t size = 1;
  for (const auto& e : edges_) {
    if (size > cap / e.num_choices()) return std::nullopt;
    size *= e.num_choices();
  }
  if (size > cap) return std::nullopt;
  return size;
}

void Supernet::validate(const SubgraphIndex& index) const {
  if (index.size() != edges_.size()) {
    throw DataError("subgraph index has " + std::to_string(index.size()) +
                    " entries, supernet has " + std::to_string(edges_.size()) +
                    " edges");
  }
  for (std::size_t t = 0; t < edges_.size(); ++t) {
    if (index[t] >= edges_[t].num_choices()) {
      throw DataError("edge " + std::to_string(t + 1) + ": choice " +
                      std::to_string(index[t] + 1) + " out of range 1.." +
                      std::to_string(edges_[t].num_choices()));
    }
  }
}

std::uint64_t Supernet::linear_index(const SubgraphIndex& index) const {
  std::uint64_t linear = 0;
  for (std::size_t t = 0; t < edges_.size(); ++t) {
    linear = linear * edges_[t].num_choices() + index[t];
  }
  return linear;
}

SubgraphIndex Supernet::index_at(std::uint64_t linear) const {
  SubgraphIndex out;
  out.picks.resize(edges_.size());
  for (std::size_t t = edges_.size(); t-- > 0;) {
    const auto c = edges_[t].num_choices();
    out[t] = static_cast<std::size_t>(linear % c);
    linear /= c;
  }
  return out;
}

std::uint64_t Supernet::hash() const { return fnv1a(to_json(*this).dump()); }

bool Supernet::operator==(const Supernet& other) const {
  if (name_ != other.name_ || nodes_ != other.nodes_ ||
      edges_.size() != other.edges_.size()) {
    return false;
  }
  for (std::size_t t = 0; t < edges_.size(); ++t) {
    const auto& a = edges_[t];
    const auto& b = other.edges_[t];
    if (a.u != b.u || a.v != b.v || a.choices != b.choices) return false;
  }
  return true;
}

SubgraphIndex first_index(const Supernet& s) {
  SubgraphIndex out;
  out.picks.assign(s.num_edges(), 0);
  return out;
}

bool next_index(const Supernet& s, SubgraphIndex& index) {
  for (std::size_t t = s.num_edges(); t-- > 0;) {
    if (++index[t] < s.edge(t).num_choices()) return true;
    index[t] = 0;
  }
  return false;
}

void for_each_index(const Supernet& s, std::uint64_t cap,
                    const std::function<void(const SubgraphIndex&)>& fn) {
  if (!s.space_size_within(cap)) {
    throw CapExceeded("subgraph space of size " + s.space_size().str() +
                      " exceeds enumeration cap " + std::to_string(cap));
  }
  auto index = first_index(s);
  do {
    fn(index);
  } while (next_index(s, index));
}

std::vector<SubgraphIndex> enumerate_indices(const Supernet& s,
                                             std::uint64_t cap) {
  std::vector<SubgraphIndex> out;
  for_each_index(s, cap, [&](const SubgraphIndex& idx) { out.push_back(idx); });
  return out;
}

Supernet supernet_from_json(const nlohmann::json& doc) {
  try {
    std::string name = doc.value("name", std::string("supernet"));
    auto nodes = doc.at("nodes").get<std::vector<std::string>>();
    std::vector<EdgeSpec> edges;
    const auto& arr = doc.at("edges");
    if (!arr.is_array()) throw DataError("'edges' must be an array");
    for (std::size_t t = 0; t < arr.size(); ++t) {
      const auto& e = arr[t];
      try {
        edges.push_back(EdgeSpec{e.at("u").get<std::string>(),
                                 e.at("v").get<std::string>(),
                                 e.at("choices").get<std::vector<std::string>>()});
      } catch (const nlohmann::json::exception& ex) {
        throw DataError("edge " + std::to_string(t + 1) + ": " + ex.what());
      }
    }
    return Supernet(std::move(name), std::move(nodes), std::move(edges));
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("supernet document: ") + ex.what());
  }
}

Supernet load_supernet(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& ex) {
    throw DataError(std::string("supernet parse error: ") + ex.what());
  }
  return supernet_from_json(doc);
}

Supernet load_supernet_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open supernet file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_supernet(buf.str());
}

nlohmann::json to_json(const Supernet& s) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : s.edges()) {
    edges.push_back({{"u", s.nodes()[e.u]},
                     {"v", s.nodes()[e.v]},
                     {"choices", e.choices}});
  }
  return {{"name", s.name()}, {"nodes", s.nodes()}, {"edges", edges}};
}

Supernet make_chain(std::size_t edges, std::size_t choices) {
  std::vector<std::vector<std::string>> all(edges, numbered("op", choices));
  return make_chain(all, "chain");
}

Supernet make_chain(const std::vector<std::vector<std::string>>& choices,
                    std::string name) {
  auto nodes = numbered("n", choices.size() + 1);
  std::vector<EdgeSpec> specs;
  for (std::size_t t = 0; t < choices.size(); ++t) {
    specs.push_back({nodes[t], nodes[t + 1], choices[t]});
  }
  return Supernet(std::move(name), std::move(nodes), std::move(specs));
}

Supernet make_ring(std::size_t edges, std::size_t choices) {
  auto nodes = numbered("n", edges);
  std::vector<EdgeSpec> specs;
  for (std::size_t t = 0; t < edges; ++t) {
    specs.push_back({nodes[t], nodes[(t + 1) % edges], numbered("op", choices)});
  }
  return Supernet("ring", std::move(nodes), std::move(specs));
}

Supernet make_star(std::size_t edges, std::size_t choices) {
  std::vector<std::string> nodes{"hub"};
  auto leaves = numbered("leaf", edges);
  nodes.insert(nodes.end(), leaves.begin(), leaves.end());
  std::vector<EdgeSpec> specs;
  for (const auto& leaf : leaves) {
    specs.push_back({"hub", leaf, numbered("op", choices)});
  }
  return Supernet("star", std::move(nodes), std::move(specs));
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tnsupernet
