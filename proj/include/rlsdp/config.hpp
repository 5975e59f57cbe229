#pragma once

// Plain key-value configuration files:
//
//   method = SWA            # top-level engine keys
//   tau = 250
//   agree_ratio = 0.5
//   port = 8080
//
//   [map]                   # inference keys use the config struct field names
//   step_size = 0.05
//   [swa]
//   learning_rate = 1.0
//   [hmc]
//   n_samples = 500

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rlsdp/error.hpp"
#include "rlsdp/inference.hpp"
#include "rlsdp/model.hpp"

namespace rlsdp {

/// Flattened "section.key" -> value; top-level keys have no prefix.
using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& is) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(Errc::invalid_argument, std::string("config: ") + e.what());
  }
  KeyValues out;
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      out[key] = node.data();
      continue;
    }
    for (const auto& [sub, leaf] : node) out[key + "." + sub] = leaf.data();
  }
  return out;
}

inline KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::io, "cannot read config " + path.string());
  return parse_key_values(is);
}

namespace detail {

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream ss(text);
  T value{};
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw Error(Errc::invalid_argument, "config key '" + key + "': expected a boolean");
  } else if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else {
    if (std::is_unsigned_v<T> && text.find('-') != std::string::npos) {
      throw Error(Errc::invalid_argument, "config key '" + key + "': expected a non-negative integer");
    }
    ss >> value;
    if (ss.fail() || !(ss >> std::ws).eof()) {
      throw Error(Errc::invalid_argument, "config key '" + key + "': cannot parse '" + text + "'");
    }
    return value;
  }
}

}  // namespace detail

/// Inference hyperparameters for one run. `tau` unset means the size-based default.
/// MAP runs full-batch, tuned for replica-scale data.
struct InferenceSettings {
  std::optional<double> tau;
  double bias_prior_std = 1.0;
  MapConfig map{.step_size = 0.3, .max_iters = 150, .minibatch_size = kFullBatch};
  SwaConfig swa;
  HmcConfig hmc;

  ModelConfig model_for(std::size_t participants, std::size_t responses) const {
    return {tau.value_or(ModelConfig::default_tau(participants, responses)), bias_prior_std};
  }
};

struct EngineSettings {
  Method method = Method::SWA;
  double agree_ratio = 0.5;
  bool allow_self_votes = false;
  int port = 8080;
  int ws_port = 8081;
  std::uint64_t seed = 1;
  double auto_close_seconds = 0.0;  ///< 0 disables the voting timer
  std::string event_log;
  InferenceSettings inference;
};

/// Applies section keys ("map.*", "swa.*", "hmc.*") and model keys. Returns
/// false for a key it does not know.
inline bool apply_key(InferenceSettings& s, const std::string& key, const std::string& v) {
  using detail::parse_value;
  if (key == "tau") s.tau = parse_value<double>(key, v);
  else if (key == "bias_prior_std") s.bias_prior_std = parse_value<double>(key, v);
  else if (key == "map.step_size") s.map.step_size = parse_value<double>(key, v);
  else if (key == "map.max_iters") s.map.max_iters = parse_value<std::size_t>(key, v);
  else if (key == "map.minibatch_size") s.map.minibatch_size = parse_value<std::size_t>(key, v);
  else if (key == "map.convergence_tol") s.map.convergence_tol = parse_value<double>(key, v);
  else if (key == "map.seed") s.map.seed = parse_value<std::uint64_t>(key, v);
  else if (key == "swa.learning_rate") s.swa.learning_rate = parse_value<double>(key, v);
  else if (key == "swa.n_samples") s.swa.n_samples = parse_value<std::size_t>(key, v);
  else if (key == "swa.steps_between_samples") s.swa.steps_between_samples = parse_value<std::size_t>(key, v);
  else if (key == "swa.minibatch_size") s.swa.minibatch_size = parse_value<std::size_t>(key, v);
  else if (key == "swa.seed") s.swa.seed = parse_value<std::uint64_t>(key, v);
  else if (key == "hmc.step_size") s.hmc.step_size = parse_value<double>(key, v);
  else if (key == "hmc.n_leapfrog") s.hmc.n_leapfrog = parse_value<std::size_t>(key, v);
  else if (key == "hmc.n_samples") s.hmc.n_samples = parse_value<std::size_t>(key, v);
  else if (key == "hmc.n_burnin") s.hmc.n_burnin = parse_value<std::size_t>(key, v);
  else if (key == "hmc.seed") s.hmc.seed = parse_value<std::uint64_t>(key, v);
  else if (key == "hmc.boundary") {
    if (v == "reflect") s.hmc.boundary = BoundaryMode::Reflect;
    else if (v == "reject") s.hmc.boundary = BoundaryMode::Reject;
    else throw Error(Errc::invalid_argument, "hmc.boundary must be reflect or reject");
  } else {
    return false;
  }
  return true;
}

inline bool apply_key(EngineSettings& s, const std::string& key, const std::string& v) {
  using detail::parse_value;
  if (key == "method") s.method = method_from_string(v);
  else if (key == "agree_ratio") s.agree_ratio = parse_value<double>(key, v);
  else if (key == "allow_self_votes") s.allow_self_votes = parse_value<bool>(key, v);
  else if (key == "port") s.port = parse_value<int>(key, v);
  else if (key == "ws_port") s.ws_port = parse_value<int>(key, v);
  else if (key == "seed") s.seed = parse_value<std::uint64_t>(key, v);
  else if (key == "auto_close_seconds") s.auto_close_seconds = parse_value<double>(key, v);
  else if (key == "event_log") s.event_log = v;
  else return apply_key(s.inference, key, v);
  return true;
}

/// Applies every entry; unknown keys are an error so typos do not pass silently.
template <typename Settings>
void apply_key_values(Settings& s, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (!apply_key(s, key, value)) throw Error(Errc::invalid_argument, "unknown config key '" + key + "'");
  }
}

}  // namespace rlsdp
