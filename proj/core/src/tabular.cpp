#include "tnsupernet/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "tnsupernet/errors.hpp"

namespace tnsupernet {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_number(std::string_view field, std::size_t line) {
  field = trim(field);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw DataError("line " + std::to_string(line) + ": malformed number '" +
                    std::string(field) + "'");
  }
  return value;
}

std::size_t parse_choice(std::string_view field, std::size_t line) {
  field = trim(field);
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || value == 0) {
    throw DataError("line " + std::to_string(line) + ": malformed choice index '" +
                    std::string(field) + "'");
  }
  return value;
}

}  // namespace

double TabularBenchmark::val(const SubgraphIndex& idx) const {
  supernet->validate(idx);
  return val_score[supernet->linear_index(idx)];
}

double TabularBenchmark::test(const SubgraphIndex& idx) const {
  supernet->validate(idx);
  return test_score[supernet->linear_index(idx)];
}

double TabularBenchmark::best_test() const {
  return *std::max_element(test_score.begin(), test_score.end());
}

double TabularBenchmark::regret(const SubgraphIndex& idx) const {
  return best_test() - test(idx);
}

TabularBenchmark generate_synthetic(const SyntheticSpec& spec) {
  if (!spec.supernet) throw ConfigError("supernet", "synthetic spec needs a supernet");
  const auto& s = *spec.supernet;
  auto size = s.space_size_within(spec.enumeration_cap);
  if (!size) throw CapExceeded("synthetic benchmark: space too large to tabulate");
  s.validate(spec.planted);
  if (!(spec.gap > 0.0)) throw ConfigError("gap", "gap must be positive");
  if (!(spec.noise_sd >= 0.0)) throw ConfigError("noise_sd", "noise_sd must be >= 0");

  // Edge pairs that share a node.
  std::vector<std::pair<std::size_t, std::size_t>> coupled;
  for (std::size_t a = 0; a < s.num_edges(); ++a)
    for (std::size_t b = a + 1; b < s.num_edges(); ++b) {
      const auto& ea = s.edge(a);
      const auto& eb = s.edge(b);
      if (ea.u == eb.u || ea.u == eb.v || ea.v == eb.u || ea.v == eb.v) {
        coupled.emplace_back(a, b);
      }
    }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> base(0.0, 0.5);
  std::normal_distribution<double> noise(0.0, spec.noise_sd > 0.0 ? spec.noise_sd : 1.0);

  TabularBenchmark b;
  b.supernet = spec.supernet;
  b.name = "synthetic-" + s.name();
  b.source = "synthetic(seed=" + std::to_string(spec.seed) + ")";
  b.val_score.resize(*size);
  b.test_score.resize(*size);
  const std::uint64_t planted = s.linear_index(spec.planted);

  auto idx = first_index(s);
  std::uint64_t linear = 0;
  do {
    double score = base(rng);
    for (auto [a, c] : coupled) {
      if (idx[a] == idx[c]) score += spec.pairwise_strength;
    }
    const double nv = spec.noise_sd > 0.0 ? noise(rng) : 0.0;
    const double nt = spec.noise_sd > 0.0 ? noise(rng) : 0.0;
    b.val_score[linear] = score + nv;
    b.test_score[linear] = score + nt;
    ++linear;
  } while (next_index(s, idx));

  double max_val = -std::numeric_limits<double>::infinity();
  double max_test = -std::numeric_limits<double>::infinity();
  for (std::uint64_t k = 0; k < *size; ++k) {
    if (k == planted) continue;
    max_val = std::max(max_val, b.val_score[k]);
    max_test = std::max(max_test, b.test_score[k]);
  }
  if (*size == 1) {
    max_val = 0.0;
    max_test = 0.0;
  }
  b.val_score[planted] = max_val + spec.gap;
  b.test_score[planted] = max_test + spec.gap;
  return b;
}

TabularBenchmark parse_benchmark_csv(std::string_view text,
                                     std::shared_ptr<const Supernet> supernet,
                                     std::string source) {
  struct Row {
    std::vector<std::size_t> picks;
    double val;
    double test;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::size_t T = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() < 3 || trim(fields[fields.size() - 2]) != "val" ||
          trim(fields.back()) != "test") {
        throw DataError("line 1: header must be i_1,...,i_T,val,test");
      }
      T = fields.size() - 2;
      for (std::size_t t = 0; t < T; ++t) {
        if (trim(fields[t]) != "i_" + std::to_string(t + 1)) {
          throw DataError("line 1: expected column 'i_" + std::to_string(t + 1) + "'");
        }
      }
      continue;
    }
    if (fields.size() != T + 2) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(T + 2) + " fields, got " +
                      std::to_string(fields.size()));
    }
    Row row;
    row.line = line_no;
    for (std::size_t t = 0; t < T; ++t) row.picks.push_back(parse_choice(fields[t], line_no) - 1);
    row.val = parse_number(fields[T], line_no);
    row.test = parse_number(fields[T + 1], line_no);
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw DataError("benchmark CSV is empty");

  if (!supernet) {
    std::vector<std::size_t> counts(T, 0);
    for (const auto& r : rows)
      for (std::size_t t = 0; t < T; ++t) counts[t] = std::max(counts[t], r.picks[t] + 1);
    std::vector<std::vector<std::string>> choices(T);
    for (std::size_t t = 0; t < T; ++t) {
      if (counts[t] == 0) throw DataError("benchmark CSV has no rows");
      for (std::size_t c = 1; c <= counts[t]; ++c) choices[t].push_back("op" + std::to_string(c));
    }
    supernet = std::make_shared<const Supernet>(make_chain(choices, "benchmark"));
  }
  const auto& s = *supernet;
  if (s.num_edges() != T) {
    throw DataError("benchmark has " + std::to_string(T) + " index columns, supernet has " +
                    std::to_string(s.num_edges()) + " edges");
  }
  auto size = s.space_size_within(100'000'000);
  if (!size) throw CapExceeded("benchmark space too large to tabulate");

  TabularBenchmark b;
  b.supernet = supernet;
  b.source = std::move(source);
  b.name = s.name();
  b.val_score.assign(*size, std::numeric_limits<double>::quiet_NaN());
  b.test_score.assign(*size, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> seen_at(*size, 0);
  for (const auto& r : rows) {
    SubgraphIndex idx{r.picks};
    try {
      s.validate(idx);
    } catch (const DataError& ex) {
      throw DataError("line " + std::to_string(r.line) + ": " + ex.what());
    }
    const auto k = s.linear_index(idx);
    if (seen_at[k] != 0) {
      throw DataError("line " + std::to_string(r.line) + ": duplicate index " +
                      to_string(idx) + " (first at line " + std::to_string(seen_at[k]) + ")");
    }
    seen_at[k] = r.line;
    b.val_score[k] = r.val;
    b.test_score[k] = r.test;
  }
  for (std::uint64_t k = 0; k < *size; ++k) {
    if (seen_at[k] == 0) {
      throw DataError("missing index " + to_string(s.index_at(k)));
    }
  }
  return b;
}

TabularBenchmark load_benchmark_csv(const std::string& path,
                                    std::shared_ptr<const Supernet> supernet) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open benchmark '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_benchmark_csv(buf.str(), std::move(supernet), path);
}

std::string benchmark_csv(const TabularBenchmark& b) {
  const auto& s = *b.supernet;
  std::ostringstream out;
  for (std::size_t t = 0; t < s.num_edges(); ++t) out << "i_" << t + 1 << ',';
  out << "val,test\n";
  char buf[64];
  auto idx = first_index(s);
  std::uint64_t k = 0;
  do {
    for (std::size_t t = 0; t < s.num_edges(); ++t) out << idx[t] + 1 << ',';
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", b.val_score[k], b.test_score[k]);
    out << buf << '\n';
    ++k;
  } while (next_index(s, idx));
  return out.str();
}

TabularEvaluator::TabularEvaluator(std::shared_ptr<const TabularBenchmark> bench)
    : bench_(std::move(bench)) {
  if (!bench_) throw ConfigError("benchmark", "null benchmark");
}

double TabularEvaluator::evaluate(const SubgraphIndex& index) const {
  ++val_reads_;
  return bench_->val(index);
}

std::optional<double> TabularEvaluator::final_evaluate(const SubgraphIndex& index) const {
  ++test_reads_;
  return bench_->test(index);
}

ObjectiveValue TabularEvaluator::relaxed_objective(const TnDistribution& dist) const {
  const auto& s = *bench_->supernet;
  auto e = dist.expectation_grad([&](const SubgraphIndex& idx) {
    ++val_reads_;
    return bench_->val_score[s.linear_index(idx)];
  });
  return ObjectiveValue{e.value, std::move(e.gradient)};
}

}  // namespace tnsupernet
