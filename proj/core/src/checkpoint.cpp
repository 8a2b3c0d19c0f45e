#include "tnsupernet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tnsupernet/errors.hpp"

namespace tnsupernet {

namespace {

constexpr char kMagic[8] = {'T', 'N', 'S', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

bool same_cores(const CoreSet& a, const CoreSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (!a[t].same_shape(b[t]) || a[t].edge != b[t].edge) return false;
    if (std::memcmp(a[t].values.data(), b[t].values.data(),
                    a[t].values.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

nlohmann::json cores_to_json(const CoreSet& cores) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cores) {
    arr.push_back({{"edge", c.edge + 1},
                   {"shape", {c.left_rank, c.choices, c.right_rank}},
                   {"values", c.values}});
  }
  return arr;
}

CoreSet cores_from_json(const nlohmann::json& arr) {
  CoreSet out;
  for (const auto& item : arr) {
    auto shape = item.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3) throw DataError("checkpoint: core shape must have 3 dims");
    EdgeCore c(item.at("edge").get<std::size_t>() - 1, shape[0], shape[1], shape[2]);
    c.values = item.at("values").get<std::vector<double>>();
    if (c.values.size() != shape[0] * shape[1] * shape[2]) {
      throw DataError("checkpoint: core " + std::to_string(c.edge + 1) +
                      " value count does not match its shape");
    }
    out.push_back(std::move(c));
  }
  return out;
}

class Writer {
 public:
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
  }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void bytes(const char* p, std::size_t n) { buf_.append(p, n); }
  void cores(const CoreSet& cs) {
    u64(cs.size());
    for (const auto& c : cs) {
      u64(c.edge);
      u64(c.left_rank);
      u64(c.choices);
      u64(c.right_rank);
      for (double x : c.values) f64(x);
    }
  }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) {
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view take(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  CoreSet cores() {
    CoreSet out(u64());
    for (auto& c : out) {
      const auto edge = u64();
      const auto l = u64();
      const auto ch = u64();
      const auto r = u64();
      if (l * ch * r > (bytes_.size() - pos_) / 8) {
        throw DataError("checkpoint: truncated core data");
      }
      c = EdgeCore(edge, l, ch, r);
      for (auto& x : c.values) x = f64();
    }
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint: truncated file");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

bool OptimizerState::operator==(const OptimizerState& other) const {
  return step == other.step && same_cores(first_moment, other.first_moment) &&
         same_cores(second_moment, other.second_moment);
}

Checkpoint make_checkpoint(const TnDistribution& dist,
                           std::optional<OptimizerState> optimizer) {
  return Checkpoint{dist.supernet().hash(), dist.ranks().values(),
                    dist.parameters(), std::move(optimizer)};
}

TnDistribution restore(const Checkpoint& ckpt,
                       std::shared_ptr<const Supernet> supernet,
                       ContractionLimits limits) {
  if (!supernet) throw DataError("checkpoint: null supernet");
  if (supernet->hash() != ckpt.supernet_hash) {
    throw DataError("checkpoint was written for a different supernet");
  }
  try {
    return TnDistribution(std::move(supernet), RankMap(ckpt.ranks), ckpt.cores,
                          limits);
  } catch (const ConfigError& ex) {
    throw DataError(std::string("checkpoint: ") + ex.what());
  }
}

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json doc{{"format", "tnsupernet-checkpoint"},
                     {"version", kVersion},
                     {"supernet_hash", ckpt.supernet_hash},
                     {"ranks", ckpt.ranks},
                     {"cores", cores_to_json(ckpt.cores)}};
  if (ckpt.optimizer) {
    doc["optimizer"] = {{"step", ckpt.optimizer->step},
                        {"first_moment", cores_to_json(ckpt.optimizer->first_moment)},
                        {"second_moment", cores_to_json(ckpt.optimizer->second_moment)}};
  }
  return doc;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", std::string()) != "tnsupernet-checkpoint") {
      throw DataError("not a tnsupernet checkpoint");
    }
    Checkpoint ckpt;
    ckpt.supernet_hash = doc.at("supernet_hash").get<std::uint64_t>();
    ckpt.ranks = doc.at("ranks").get<std::vector<std::size_t>>();
    ckpt.cores = cores_from_json(doc.at("cores"));
    if (doc.contains("optimizer")) {
      const auto& o = doc.at("optimizer");
      ckpt.optimizer = OptimizerState{o.at("step").get<std::uint64_t>(),
                                      cores_from_json(o.at("first_moment")),
                                      cores_from_json(o.at("second_moment"))};
    }
    return ckpt;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("checkpoint: ") + ex.what());
  }
}

std::string checkpoint_to_binary(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u64(kVersion);
  w.u64(ckpt.supernet_hash);
  w.u64(ckpt.ranks.size());
  for (auto r : ckpt.ranks) w.u64(r);
  w.cores(ckpt.cores);
  w.u64(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    w.u64(ckpt.optimizer->step);
    w.cores(ckpt.optimizer->first_moment);
    w.cores(ckpt.optimizer->second_moment);
  }
  return w.take();
}

Checkpoint checkpoint_from_binary(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    throw DataError("not a tnsupernet binary checkpoint");
  }
  if (r.u64() != kVersion) throw DataError("unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.supernet_hash = r.u64();
  ckpt.ranks.resize(r.u64());
  for (auto& x : ckpt.ranks) x = r.u64();
  ckpt.cores = r.cores();
  if (r.u64() != 0) {
    OptimizerState o;
    o.step = r.u64();
    o.first_moment = r.cores();
    o.second_moment = r.cores();
    ckpt.optimizer = std::move(o);
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  if (json) {
    out << checkpoint_to_json(ckpt).dump(1) << '\n';
  } else {
    out << checkpoint_to_binary(ckpt);
  }
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() >= sizeof kMagic &&
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) == 0) {
    return checkpoint_from_binary(bytes);
  }
  try {
    return checkpoint_from_json(nlohmann::json::parse(bytes));
  } catch (const nlohmann::json::parse_error& ex) {
    throw DataError(std::string("checkpoint parse error: ") + ex.what());
  }
}

}  // namespace tnsupernet
