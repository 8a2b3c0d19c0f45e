#include "tnsupernet/relational.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "tnsupernet/errors.hpp"

namespace tnsupernet {

namespace fs = std::filesystem;

std::size_t Vocabulary::intern(const std::string& name) {
  auto [it, inserted] = ids_.emplace(name, names_.size());
  if (inserted) names_.push_back(name);
  return it->second;
}

std::optional<std::size_t> Vocabulary::find(const std::string& name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::id(const std::string& name) const {
  auto found = find(name);
  if (!found) throw DataError("unknown name '" + name + "'");
  return *found;
}

SparseMatrix::SparseMatrix(std::size_t n,
                           std::vector<std::pair<std::uint32_t, std::uint32_t>> entries)
    : n_(n) {
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  row_ptr_.assign(n + 1, 0);
  col_ptr_.assign(n + 1, 0);
  for (auto [r, c] : entries) {
    ++row_ptr_[r + 1];
    ++col_ptr_[c + 1];
  }
  for (std::size_t i = 0; i < n; ++i) {
    row_ptr_[i + 1] += row_ptr_[i];
    col_ptr_[i + 1] += col_ptr_[i];
  }
  cols_.resize(entries.size());
  rows_.resize(entries.size());
  std::vector<std::size_t> rfill(row_ptr_.begin(), row_ptr_.end() - 1);
  std::vector<std::size_t> cfill(col_ptr_.begin(), col_ptr_.end() - 1);
  for (auto [r, c] : entries) {
    cols_[rfill[r]++] = c;
    rows_[cfill[c]++] = r;
  }
}

bool SparseMatrix::contains(std::size_t row_id, std::size_t col) const {
  auto r = row(row_id);
  return std::binary_search(r.begin(), r.end(), static_cast<std::uint32_t>(col));
}

std::span<const std::uint32_t> SparseMatrix::row(std::size_t r) const {
  return {cols_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
}

std::span<const std::uint32_t> SparseMatrix::column(std::size_t c) const {
  return {rows_.data() + col_ptr_[c], col_ptr_[c + 1] - col_ptr_[c]};
}

void RelationalGraph::build() {
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> per(relations.size());
  for (const auto& tr : triples) {
    per[tr.relation].emplace_back(static_cast<std::uint32_t>(tr.head),
                                  static_cast<std::uint32_t>(tr.tail));
  }
  adjacency.clear();
  adjacency.reserve(relations.size());
  for (auto& entries : per) adjacency.emplace_back(entities.size(), std::move(entries));
}

std::vector<Triple> read_triples(std::string_view text, RelationalGraph& graph,
                                 const std::string& source) {
  std::vector<Triple> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::string_view fields[3];
    std::size_t start = 0;
    std::size_t count = 0;
    while (true) {
      auto tab = line.find('\t', start);
      if (count < 3) fields[count] = line.substr(start, tab - start);
      ++count;
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (count != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw DataError(source + ":" + std::to_string(line_no) +
                      ": expected head<TAB>relation<TAB>tail");
    }
    const auto h = graph.entities.intern(std::string(fields[0]));
    const auto r = graph.relations.intern(std::string(fields[1]));
    const auto t = graph.entities.intern(std::string(fields[2]));
    out.push_back({h, r, t});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Sparse row vector over entities, sorted by entity id.
using SparseVec = std::vector<std::pair<std::uint32_t, double>>;

// Dense scratch accumulator that only visits touched entries.
class Accumulator {
 public:
  explicit Accumulator(std::size_t n) : dense_(n, 0.0), mark_(n, 0) {}

  void add(std::uint32_t i, double v) {
    if (!mark_[i]) {
      mark_[i] = 1;
      touched_.push_back(i);
    }
    dense_[i] += v;
  }
  void add(const SparseVec& v, double scale) {
    for (auto [i, x] : v) add(i, scale * x);
  }
  SparseVec take() {
    std::sort(touched_.begin(), touched_.end());
    SparseVec out;
    out.reserve(touched_.size());
    for (auto i : touched_) {
      if (dense_[i] != 0.0) out.emplace_back(i, dense_[i]);
      dense_[i] = 0.0;
      mark_[i] = 0;
    }
    touched_.clear();
    return out;
  }

 private:
  std::vector<double> dense_;
  std::vector<char> mark_;
  std::vector<std::uint32_t> touched_;
};

// v * A (row propagation).
SparseVec times(const SparseVec& v, const RelationalGraph& g, std::size_t rel,
                Accumulator& acc) {
  if (rel == kIdentityRelation) return v;
  const auto& m = g.adjacency.at(rel);
  for (auto [z, x] : v)
    for (auto y : m.row(z)) acc.add(y, x);
  return acc.take();
}

// A * w (column propagation).
SparseVec times_transposed(const SparseVec& w, const RelationalGraph& g,
                           std::size_t rel, Accumulator& acc) {
  if (rel == kIdentityRelation) return w;
  const auto& m = g.adjacency.at(rel);
  for (auto [y, x] : w)
    for (auto z : m.column(y)) acc.add(z, x);
  return acc.take();
}

double dot(const SparseVec& a, const SparseVec& b) {
  double s = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      s += a[i].second * b[j].second;
      ++i;
      ++j;
    }
  }
  return s;
}

std::map<std::size_t, std::vector<std::size_t>> group_by_head(
    std::span<const EntityPair> pairs) {
  std::map<std::size_t, std::vector<std::size_t>> out;
  for (auto [x, y] : pairs) out[x].push_back(y);
  for (auto& [x, ys] : out) {
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  }
  return out;
}

void check_chain(const TnDistribution& dist, const ChainTask& task) {
  const auto& s = dist.supernet();
  const std::size_t T = s.num_edges();
  if (s.num_nodes() != T + 1) throw ConfigError("supernet", "relational objective needs a chain supernet");
  std::vector<bool> used(s.num_nodes(), false);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& e = s.edge(t);
    if (e.is_self_loop() || (t + 1 < T && e.v != s.edge(t + 1).u)) {
      throw ConfigError("supernet", "relational objective needs a chain supernet");
    }
    if (e.num_choices() != task.candidates.size()) {
      throw ConfigError("supernet", "edge " + std::to_string(t + 1) +
                                        " choices do not match candidate relations");
    }
    used[e.u] = true;
    used[e.v] = true;
  }
  if (std::count(used.begin(), used.end(), true) != static_cast<long>(T + 1)) {
    throw ConfigError("supernet", "relational objective needs a chain supernet");
  }
}

struct ForwardPass {
  // rows[t][r] = h_t[r]; messages[t][r * C + i] = h_t[r] * A_{B_i}
  std::vector<std::vector<SparseVec>> rows;
  std::vector<std::vector<SparseVec>> messages;
};

ForwardPass forward(const RelationalGraph& g, const ChainTask& task,
                    const TnDistribution& dist, std::size_t x, Accumulator& acc,
                    RelaxedStats* stats) {
  const auto& s = dist.supernet();
  const std::size_t T = s.num_edges();
  ForwardPass fp;
  fp.rows.resize(T + 1);
  fp.messages.resize(T);
  fp.rows[0].assign(dist.ranks()[s.edge(0).u], SparseVec{{static_cast<std::uint32_t>(x), 1.0}});
  for (std::size_t t = 0; t < T; ++t) {
    const auto& a = dist.normalized()[t];
    const std::size_t C = a.choices;
    auto& msg = fp.messages[t];
    msg.resize(a.left_rank * C);
    for (std::size_t r = 0; r < a.left_rank; ++r)
      for (std::size_t i = 0; i < C; ++i) {
        msg[r * C + i] = times(fp.rows[t][r], g, task.candidates[i], acc);
        if (stats) {
          stats->max_intermediate_entries =
              std::max(stats->max_intermediate_entries, msg[r * C + i].size());
        }
      }
    auto& next = fp.rows[t + 1];
    next.resize(a.right_rank);
    for (std::size_t r2 = 0; r2 < a.right_rank; ++r2) {
      for (std::size_t r = 0; r < a.left_rank; ++r)
        for (std::size_t i = 0; i < C; ++i) acc.add(msg[r * C + i], a.at(r, i, r2));
      next[r2] = acc.take();
      if (stats) {
        stats->max_intermediate_entries =
            std::max(stats->max_intermediate_entries, next[r2].size());
      }
    }
  }
  return fp;
}

}  // namespace

RelationalGraph load_triples(const std::string& path) {
  RelationalGraph g;
  const auto text = slurp(path);
  g.triples = read_triples(text, g, path);
  if (g.triples.empty()) throw DataError(path + ": no triples");
  g.build();
  return g;
}

KgDataset load_dataset(const std::string& dir) {
  KgDataset data;
  auto read = [&](const char* name, bool required) {
    const auto path = (fs::path(dir) / name).string();
    if (!fs::exists(path)) {
      if (required) throw DataError("dataset is missing " + path);
      return std::vector<Triple>{};
    }
    return read_triples(slurp(path), data.graph, path);
  };
  data.facts = read("facts.txt", false);
  data.train = read("train.txt", true);
  data.valid = read("valid.txt", false);
  data.test = read("test.txt", false);
  if (data.facts.empty() && data.train.empty()) throw DataError(dir + ": no triples");
  data.graph.triples = data.facts;
  data.graph.triples.insert(data.graph.triples.end(), data.train.begin(), data.train.end());
  data.graph.build();
  return data;
}

void write_dataset(const std::string& dir, const KgDataset& data) {
  fs::create_directories(dir);
  const auto& g = data.graph;
  auto write = [&](const char* name, const std::vector<Triple>& triples) {
    const auto path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    for (const auto& tr : triples) {
      out << g.entities.name(tr.head) << '\t' << g.relations.name(tr.relation) << '\t'
          << g.entities.name(tr.tail) << '\n';
    }
  };
  if (!data.facts.empty()) write("facts.txt", data.facts);
  write("train.txt", data.train);
  write("valid.txt", data.valid);
  write("test.txt", data.test);
}

ChainTask make_chain_task(const KgDataset& data, const std::string& target,
                          const ChainTaskOptions& options) {
  const auto& g = data.graph;
  auto target_id = g.relations.find(target);
  if (!target_id) throw DataError("unknown target relation '" + target + "'");
  if (options.chain_length == 0) throw ConfigError("chain_length", "chain_length must be >= 1");
  ChainTask task;
  task.target = *target_id;
  task.chain_length = options.chain_length;
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    if (r == task.target && !options.include_target) continue;
    task.candidates.push_back(r);
  }
  if (options.include_identity) task.candidates.push_back(kIdentityRelation);
  if (task.candidates.empty()) throw DataError("no candidate relations");
  auto pick = [&](const std::vector<Triple>& triples) {
    std::vector<EntityPair> out;
    for (const auto& tr : triples) {
      if (tr.relation == task.target) out.emplace_back(tr.head, tr.tail);
    }
    return out;
  };
  task.train = pick(data.train);
  task.valid = pick(data.valid);
  task.test = pick(data.test);
  return task;
}

Supernet chain_supernet(const RelationalGraph& g, const ChainTask& task) {
  std::vector<std::string> labels;
  for (auto rel : task.candidates) {
    labels.push_back(rel == kIdentityRelation ? "identity" : g.relations.name(rel));
  }
  std::vector<std::vector<std::string>> choices(task.chain_length, labels);
  return make_chain(choices, "chain-" + g.relations.name(task.target));
}

ChainRule rule_from_index(const ChainTask& task, const SubgraphIndex& idx, double score) {
  ChainRule rule;
  rule.score = score;
  for (auto p : idx.picks) rule.relations.push_back(task.candidates.at(p));
  return rule;
}

std::string format_rule(const RelationalGraph& g, const ChainTask& task,
                        const ChainRule& rule) {
  std::vector<std::string> atoms;
  const std::size_t T = rule.relations.size();
  auto var = [&](std::size_t k) -> std::string {
    if (k == 0) return "C";
    if (k == T) return "A";
    return "B" + std::to_string(k);
  };
  for (std::size_t t = 0; t < T; ++t) {
    const auto rel = rule.relations[t];
    const std::string name = rel == kIdentityRelation ? "identity" : g.relations.name(rel);
    atoms.push_back(name + "(" + var(t) + "," + var(t + 1) + ")");
  }
  std::ostringstream out;
  out << g.relations.name(task.target) << "(C,A) <= ";
  for (std::size_t k = 0; k < atoms.size(); ++k) out << (k ? ", " : "") << atoms[k];
  char buf[48];
  std::snprintf(buf, sizeof buf, " [prob=%.6g]", rule.score);
  out << buf;
  return out.str();
}

nlohmann::json rule_to_json(const RelationalGraph& g, const ChainTask& task,
                            const ChainRule& rule) {
  std::vector<std::string> names;
  for (auto rel : rule.relations) {
    names.push_back(rel == kIdentityRelation ? "identity" : g.relations.name(rel));
  }
  return {{"target", g.relations.name(task.target)},
          {"body", names},
          {"prob", rule.score},
          {"text", format_rule(g, task, rule)}};
}

std::vector<double> chain_row(const RelationalGraph& g,
                              std::span<const std::size_t> relations, std::size_t x) {
  Accumulator acc(g.num_entities());
  SparseVec v{{static_cast<std::uint32_t>(x), 1.0}};
  for (auto rel : relations) v = times(v, g, rel, acc);
  std::vector<double> out(g.num_entities(), 0.0);
  for (auto [i, c] : v) out[i] = c;
  return out;
}

double hard_measure(const RelationalGraph& g, std::span<const std::size_t> relations,
                    std::span<const EntityPair> pairs) {
  Accumulator acc(g.num_entities());
  double count = 0.0;
  for (const auto& [x, ys] : group_by_head(pairs)) {
    SparseVec v{{static_cast<std::uint32_t>(x), 1.0}};
    for (auto rel : relations) {
      v = times(v, g, rel, acc);
      if (v.empty()) break;
    }
    for (auto y : ys) {
      auto it = std::lower_bound(v.begin(), v.end(), std::make_pair(static_cast<std::uint32_t>(y), -1e300));
      if (it != v.end() && it->first == y && it->second > 0.0) count += 1.0;
    }
  }
  return count;
}

ObjectiveValue relaxed_chain_objective(const RelationalGraph& g, const ChainTask& task,
                                       const TnDistribution& dist,
                                       const RelaxedOptions& options, RelaxedStats* stats) {
  check_chain(dist, task);
  const auto& s = dist.supernet();
  const std::size_t T = s.num_edges();
  const double inv_z = 1.0 / dist.ranks().product();
  Accumulator acc(g.num_entities());
  CoreSet grad_a = dist.zero_like();
  double value = 0.0;

  for (const auto& [x, ys] : group_by_head(task.train)) {
    ForwardPass fp = forward(g, task, dist, x, acc, stats);
    // Expected path counts from x, summed over the last rank index.
    for (const auto& row : fp.rows[T]) acc.add(row, inv_z);
    const SparseVec reach = acc.take();
    SparseVec seed;
    for (auto y : ys) {
      auto it = std::lower_bound(reach.begin(), reach.end(),
                                 std::make_pair(static_cast<std::uint32_t>(y), -1e300));
      const double sxy = (it != reach.end() && it->first == y) ? it->second : 0.0;
      if (options.clamp) {
        value += std::min(sxy, 1.0);
        if (sxy < 1.0) seed.emplace_back(static_cast<std::uint32_t>(y), 1.0);
      } else {
        value += sxy;
        seed.emplace_back(static_cast<std::uint32_t>(y), 1.0);
      }
    }
    if (seed.empty()) continue;

    // Backward: back[r] is the adjoint of rows[t][r].
    std::vector<SparseVec> back(dist.ranks()[s.edge(T - 1).v], seed);
    for (std::size_t t = T; t-- > 0;) {
      const auto& a = dist.normalized()[t];
      const std::size_t C = a.choices;
      auto& ga = grad_a[t];
      for (std::size_t r = 0; r < a.left_rank; ++r)
        for (std::size_t i = 0; i < C; ++i)
          for (std::size_t r2 = 0; r2 < a.right_rank; ++r2)
            ga.at(r, i, r2) += inv_z * dot(fp.messages[t][r * C + i], back[r2]);
      if (t == 0) break;
      std::vector<SparseVec> pulled(C * a.right_rank);
      for (std::size_t i = 0; i < C; ++i)
        for (std::size_t r2 = 0; r2 < a.right_rank; ++r2)
          pulled[i * a.right_rank + r2] = times_transposed(back[r2], g, task.candidates[i], acc);
      std::vector<SparseVec> prev(a.left_rank);
      for (std::size_t r = 0; r < a.left_rank; ++r) {
        for (std::size_t i = 0; i < C; ++i)
          for (std::size_t r2 = 0; r2 < a.right_rank; ++r2)
            acc.add(pulled[i * a.right_rank + r2], a.at(r, i, r2));
        prev[r] = acc.take();
      }
      back = std::move(prev);
    }
  }
  return ObjectiveValue{value, dist.softmax_backward(grad_a)};
}

std::vector<double> relaxed_row(const RelationalGraph& g, const ChainTask& task,
                                const TnDistribution& dist, std::size_t x) {
  check_chain(dist, task);
  Accumulator acc(g.num_entities());
  ForwardPass fp = forward(g, task, dist, x, acc, nullptr);
  const double inv_z = 1.0 / dist.ranks().product();
  std::vector<double> out(g.num_entities(), 0.0);
  for (const auto& row : fp.rows.back())
    for (auto [i, c] : row) out[i] += inv_z * c;
  return out;
}

RankMetrics rank_metrics(std::size_t num_entities, const RowScorer& scorer,
                         std::span<const EntityPair> queries,
                         std::span<const EntityPair> known,
                         const std::vector<std::size_t>& k_list, bool filtered) {
  if (queries.empty()) throw DataError("rank_metrics: empty query set");
  auto known_by_head = group_by_head(known);
  std::map<std::size_t, std::vector<double>> cache;
  RankMetrics m;
  for (auto k : k_list) m.hits[k] = 0.0;
  for (auto [x, y] : queries) {
    auto it = cache.find(x);
    if (it == cache.end()) it = cache.emplace(x, scorer(x)).first;
    const auto& scores = it->second;
    if (scores.size() != num_entities) throw DataError("rank_metrics: scorer row has wrong size");
    static const std::vector<std::size_t> kNone;
    auto kit = known_by_head.find(x);
    const auto& others = (filtered && kit != known_by_head.end()) ? kit->second : kNone;
    const double sy = scores[y];
    std::size_t rank = 1;
    for (std::size_t e = 0; e < num_entities; ++e) {
      if (e == y || scores[e] < sy) continue;
      if (std::binary_search(others.begin(), others.end(), e)) continue;
      ++rank;
    }
    m.mrr += 1.0 / static_cast<double>(rank);
    for (auto k : k_list) {
      if (rank <= k) m.hits[k] += 1.0;
    }
  }
  m.queries = queries.size();
  const double n = static_cast<double>(queries.size());
  m.mrr /= n;
  for (auto& [k, h] : m.hits) h /= n;
  return m;
}

std::vector<ChainRule> extract_top_rules(const TnDistribution& dist, const ChainTask& task,
                                         std::size_t k) {
  const auto& s = dist.supernet();
  std::vector<std::pair<SubgraphIndex, double>> scored;
  if (dist.enumerable()) {
    auto idx = first_index(s);
    do {
      scored.emplace_back(idx, dist.prob(idx));
    } while (next_index(s, idx));
  } else {
    const std::size_t width = std::max<std::size_t>(k, 32);
    std::vector<std::pair<std::vector<std::size_t>, double>> beam{{{}, 1.0}};
    for (std::size_t t = 0; t < s.num_edges(); ++t) {
      std::vector<std::pair<std::vector<std::size_t>, double>> next;
      for (const auto& [prefix, p] : beam) {
        auto probs = dist.marginal(t, prefix);
        for (std::size_t i = 0; i < probs.size(); ++i) {
          auto ext = prefix;
          ext.push_back(i);
          next.emplace_back(std::move(ext), p * probs[i]);
        }
      }
      std::stable_sort(next.begin(), next.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
      if (next.size() > width) next.resize(width);
      beam = std::move(next);
    }
    for (auto& [prefix, p] : beam) scored.emplace_back(SubgraphIndex{prefix}, p);
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (scored.size() > k) scored.resize(k);
  std::vector<ChainRule> out;
  for (const auto& [idx, p] : scored) out.push_back(rule_from_index(task, idx, p));
  return out;
}

PlantedKg generate_planted_kg(const PlantedKgSpec& spec, const ChainTaskOptions& options) {
  if (spec.num_entities < 2 || spec.num_relations == 0) {
    throw ConfigError("entities", "planted KG needs >= 2 entities and >= 1 relation");
  }
  if (spec.out_degree == 0 || spec.out_degree >= spec.num_entities) {
    throw ConfigError("out_degree", "out_degree must lie in [1, entities)");
  }
  if (spec.rule.empty()) throw ConfigError("rule", "planted rule is empty");
  for (auto r : spec.rule) {
    if (r >= spec.num_relations) throw ConfigError("rule", "planted rule uses an unknown relation");
  }
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0) || !(spec.coverage > 0.0 && spec.coverage <= 1.0)) {
    throw ConfigError("noise", "noise must lie in [0,1] and coverage in (0,1]");
  }

  std::mt19937_64 rng(spec.seed);
  PlantedKg out;
  auto& data = out.data;
  auto& g = data.graph;
  for (std::size_t e = 0; e < spec.num_entities; ++e) g.entities.intern("e" + std::to_string(e));
  for (std::size_t r = 0; r < spec.num_relations; ++r) g.relations.intern("r" + std::to_string(r + 1));
  const std::size_t target = g.relations.intern("target");

  std::uniform_int_distribution<std::size_t> any_entity(0, spec.num_entities - 1);
  std::vector<Triple> base;
  for (std::size_t r = 0; r < spec.num_relations; ++r)
    for (std::size_t x = 0; x < spec.num_entities; ++x) {
      std::set<std::size_t> tails;
      while (tails.size() < spec.out_degree) {
        const auto y = any_entity(rng);
        if (y != x) tails.insert(y);
      }
      for (auto y : tails) base.push_back({x, r, y});
    }
  g.triples = base;
  g.build();

  std::bernoulli_distribution keep(spec.coverage);
  std::bernoulli_distribution corrupt(spec.noise);
  std::set<EntityPair> pairs;
  for (std::size_t x = 0; x < spec.num_entities; ++x) {
    auto row = chain_row(g, spec.rule, x);
    for (std::size_t y = 0; y < spec.num_entities; ++y) {
      if (y == x || row[y] <= 0.0 || !keep(rng)) continue;
      if (corrupt(rng)) {
        std::size_t z = any_entity(rng);
        while (z == x) z = any_entity(rng);
        pairs.emplace(x, z);
      } else {
        pairs.emplace(x, y);
      }
    }
  }
  if (pairs.empty()) throw DataError("planted KG: densities yield an empty target relation");

  std::vector<EntityPair> shuffled(pairs.begin(), pairs.end());
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const std::size_t n = shuffled.size();
  const std::size_t n_train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
  const std::size_t n_valid = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  data.train = base;
  for (std::size_t k = 0; k < n; ++k) {
    const Triple tr{shuffled[k].first, target, shuffled[k].second};
    if (k < n_train) {
      data.train.push_back(tr);
    } else if (k < n_train + n_valid) {
      data.valid.push_back(tr);
    } else {
      data.test.push_back(tr);
    }
  }
  std::sort(data.train.begin(), data.train.end());
  std::sort(data.valid.begin(), data.valid.end());
  std::sort(data.test.begin(), data.test.end());
  g.triples = data.train;
  g.build();
  out.task = make_chain_task(data, "target", options);
  return out;
}

ChainEvaluator::ChainEvaluator(std::shared_ptr<const KgDataset> data, ChainTask task,
                               RelaxedOptions options, bool filtered)
    : data_(std::move(data)), task_(std::move(task)), options_(options), filtered_(filtered) {
  if (!data_) throw ConfigError("data", "null dataset");
  known_ = task_.train;
  known_.insert(known_.end(), task_.valid.begin(), task_.valid.end());
  known_.insert(known_.end(), task_.test.begin(), task_.test.end());
}

double ChainEvaluator::evaluate(const SubgraphIndex& index) const {
  const auto rule = rule_from_index(task_, index);
  return hard_measure(data_->graph, rule.relations, task_.train);
}

RankMetrics ChainEvaluator::test_metrics(std::span<const std::size_t> relations) const {
  std::vector<std::size_t> rel(relations.begin(), relations.end());
  const auto& g = data_->graph;
  return rank_metrics(
      g.num_entities(), [&](std::size_t x) { return chain_row(g, rel, x); }, task_.test, known_,
      {1, 3, 10}, filtered_);
}

std::optional<double> ChainEvaluator::final_evaluate(const SubgraphIndex& index) const {
  if (task_.test.empty()) return std::nullopt;
  return test_metrics(rule_from_index(task_, index).relations).mrr;
}

ObjectiveValue ChainEvaluator::relaxed_objective(const TnDistribution& dist) const {
  return relaxed_chain_objective(data_->graph, task_, dist, options_);
}

}  // namespace tnsupernet
