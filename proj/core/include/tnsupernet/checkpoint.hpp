#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tnsupernet/tn_distribution.hpp"

namespace tnsupernet {

/// Adaptive-moment (or plain) optimizer state, one moment array per core.
struct OptimizerState {
  std::uint64_t step = 0;
  CoreSet first_moment;
  CoreSet second_moment;

  bool operator==(const OptimizerState&) const;
};

/// Snapshot of a distribution's raw parameters. `supernet_hash` guards
/// against restoring onto a different supernet.
struct Checkpoint {
  std::uint64_t supernet_hash = 0;
  std::vector<std::size_t> ranks;
  CoreSet cores;
  std::optional<OptimizerState> optimizer;
};

Checkpoint make_checkpoint(const TnDistribution& dist,
                           std::optional<OptimizerState> optimizer = {});

/// Rebuilds a distribution; throws DataError on hash or shape mismatch.
TnDistribution restore(const Checkpoint& ckpt,
                       std::shared_ptr<const Supernet> supernet,
                       ContractionLimits limits = {});

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

/// Little-endian binary form; doubles are stored bit-exactly.
std::string checkpoint_to_binary(const Checkpoint& ckpt);
Checkpoint checkpoint_from_binary(std::string_view bytes);

/// Format chosen by extension: ".json" is JSON, anything else binary.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tnsupernet
