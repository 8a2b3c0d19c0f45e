#include "tnsupernet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "tnsupernet/errors.hpp"

namespace tnsupernet {

namespace {

template <typename T>
void read(const nlohmann::json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key, std::string("config key '") + key + "' has the wrong type");
  }
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "mode", "iterations", "samples_per_step", "learning_rate", "optimizer",
      "beta1", "beta2", "epsilon", "baseline_decay", "seed", "log_every",
      "early_stop", "rank", "init_sd", "checkpoint_every", "enumeration_cap",
      "rank_assignment_cap", "factor_cap", "target", "chain_length", "identity",
      "clamp", "filtered", "top_k"};
  return keys;
}

}  // namespace

SearchMode parse_mode(const std::string& text) {
  if (text == "stochastic") return SearchMode::kStochastic;
  if (text == "deterministic") return SearchMode::kDeterministic;
  throw ConfigError("mode", "mode must be 'stochastic' or 'deterministic', got '" + text + "'");
}

OptimizerKind parse_optimizer(const std::string& text) {
  if (text == "plain-gradient" || text == "sgd") return OptimizerKind::kPlainGradient;
  if (text == "adaptive-moments" || text == "adam") return OptimizerKind::kAdaptiveMoments;
  throw ConfigError("optimizer", "unknown optimizer '" + text + "'");
}

RunConfig run_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!known_keys().count(key)) throw ConfigError(key, "unknown config key '" + key + "'");
  }
  if (!doc.contains("mode")) throw ConfigError("mode", "missing config key 'mode'");

  RunConfig cfg;
  auto& s = cfg.search;
  std::string text;
  read(doc, "mode", text);
  s.mode = parse_mode(text);
  read(doc, "iterations", s.iterations);
  read(doc, "samples_per_step", s.samples_per_step);
  if (doc.contains("learning_rate")) {
    double lr = 0.0;
    read(doc, "learning_rate", lr);
    s.learning_rate = lr;
  }
  if (doc.contains("optimizer")) {
    read(doc, "optimizer", text);
    s.optimizer = parse_optimizer(text);
  }
  read(doc, "beta1", s.beta1);
  read(doc, "beta2", s.beta2);
  read(doc, "epsilon", s.epsilon);
  read(doc, "baseline_decay", s.baseline_decay);
  read(doc, "seed", s.seed);
  read(doc, "log_every", s.log_every);
  if (doc.contains("early_stop")) {
    const auto& es = doc.at("early_stop");
    if (es.is_string() && es.get<std::string>() == "none") {
      s.stable_argmax_checks = 0;
    } else if (es.is_object() && es.contains("stable_argmax")) {
      read(es, "stable_argmax", s.stable_argmax_checks);
      if (s.stable_argmax_checks == 0) {
        throw ConfigError("early_stop", "stable_argmax needs k >= 1");
      }
    } else {
      throw ConfigError("early_stop", "early_stop must be \"none\" or {\"stable_argmax\": k}");
    }
  }
  read(doc, "rank", cfg.rank);
  if (cfg.rank == 0) throw ConfigError("rank", "rank must be >= 1");
  read(doc, "init_sd", cfg.init_sd);
  if (!(cfg.init_sd >= 0.0)) throw ConfigError("init_sd", "init_sd must be >= 0");
  read(doc, "checkpoint_every", cfg.checkpoint_every);
  read(doc, "enumeration_cap", cfg.limits.enumeration_cap);
  read(doc, "rank_assignment_cap", cfg.limits.rank_assignment_cap);
  read(doc, "factor_cap", cfg.limits.factor_cap);
  read(doc, "target", cfg.target);
  read(doc, "chain_length", cfg.chain_length);
  if (cfg.chain_length == 0) throw ConfigError("chain_length", "chain_length must be >= 1");
  read(doc, "identity", cfg.identity);
  read(doc, "clamp", cfg.clamp);
  read(doc, "filtered", cfg.filtered);
  read(doc, "top_k", cfg.top_k);
  s.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError("config", std::string("config parse error: ") + ex.what());
  }
  return run_config_from_json(doc);
}

nlohmann::json to_json(const RunConfig& cfg) {
  const auto& s = cfg.search;
  nlohmann::json doc{{"mode", to_string(s.mode)},
                     {"iterations", s.iterations},
                     {"samples_per_step", s.samples_per_step},
                     {"learning_rate", s.effective_learning_rate()},
                     {"optimizer", to_string(s.optimizer)},
                     {"beta1", s.beta1},
                     {"beta2", s.beta2},
                     {"epsilon", s.epsilon},
                     {"baseline_decay", s.baseline_decay},
                     {"seed", s.seed},
                     {"log_every", s.log_every},
                     {"rank", cfg.rank},
                     {"init_sd", cfg.init_sd},
                     {"checkpoint_every", cfg.checkpoint_every},
                     {"enumeration_cap", cfg.limits.enumeration_cap},
                     {"rank_assignment_cap", cfg.limits.rank_assignment_cap},
                     {"factor_cap", cfg.limits.factor_cap},
                     {"target", cfg.target},
                     {"chain_length", cfg.chain_length},
                     {"identity", cfg.identity},
                     {"clamp", cfg.clamp},
                     {"filtered", cfg.filtered},
                     {"top_k", cfg.top_k}};
  if (s.stable_argmax_checks > 0) {
    doc["early_stop"] = {{"stable_argmax", s.stable_argmax_checks}};
  } else {
    doc["early_stop"] = "none";
  }
  return doc;
}

}  // namespace tnsupernet
