#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "tnsupernet/search.hpp"

namespace tnsupernet {

/// Everything a run needs besides its data: the search loop settings plus
/// encoding and task options. JSON field names mirror the struct fields.
struct RunConfig {
  SearchConfig search;
  std::size_t rank = 2;
  double init_sd = 1e-3;
  std::size_t checkpoint_every = 0;
  ContractionLimits limits;
  // relational tasks
  std::string target = "target";
  std::size_t chain_length = 2;
  bool identity = false;
  bool clamp = false;
  bool filtered = true;
  std::size_t top_k = 5;
};

/// Parses a run config. `mode` is required; everything else defaults.
/// Throws ConfigError naming the key at fault.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& cfg);

SearchMode parse_mode(const std::string& text);
OptimizerKind parse_optimizer(const std::string& text);

}  // namespace tnsupernet
