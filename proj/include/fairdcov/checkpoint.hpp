// Versioned model container. Parameters are stored as hex-encoded IEEE-754
// bit patterns so a load reproduces forward outputs bit for bit.
#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fairdcov/core.hpp"
#include "fairdcov/network.hpp"

namespace fairdcov {

struct Checkpoint {
  Network model;
  std::uint64_t seed = 0;
  std::string preprocess_ref;  // pointer to the frozen-transform artefact
};

namespace detail {

inline std::string double_to_hex(double v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  return buf;
}

inline double hex_to_double(const std::string& s) {
  return std::bit_cast<double>(static_cast<std::uint64_t>(std::stoull(s, nullptr, 16)));
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  nlohmann::json j;
  j["format"] = "fairdcov-model";
  j["version"] = 1;
  const NetworkSpec& spec = cp.model.spec();
  j["network"] = {{"input_dim", spec.input_dim},
                  {"hidden_layers", spec.hidden_layers},
                  {"hidden_width", spec.hidden_width},
                  {"head", spec.head == OutputHead::sigmoid ? "sigmoid" : "exponential"},
                  {"dropout", spec.dropout}};
  nlohmann::json theta = nlohmann::json::array();
  for (double v : cp.model.theta()) theta.push_back(detail::double_to_hex(v));
  j["theta"] = std::move(theta);
  j["seed"] = cp.seed;
  j["preprocess_ref"] = cp.preprocess_ref;
  std::ofstream out(path);
  if (!out) throw ConfigError("save_checkpoint: cannot open " + path);
  out << j.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != "fairdcov-model" || j.value("version", 0) != 1)
    throw ConfigError("load_checkpoint: unrecognised container format");

  NetworkSpec spec;
  const auto& n = j.at("network");
  spec.input_dim = n.at("input_dim").get<std::size_t>();
  spec.hidden_layers = n.at("hidden_layers").get<std::size_t>();
  spec.hidden_width = n.at("hidden_width").get<std::size_t>();
  spec.head = n.at("head").get<std::string>() == "sigmoid" ? OutputHead::sigmoid
                                                           : OutputHead::exponential;
  spec.dropout = n.at("dropout").get<double>();

  Checkpoint cp;
  cp.model = Network(spec);
  const auto& theta = j.at("theta");
  if (theta.size() != cp.model.param_count())
    throw ConfigError("load_checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < theta.size(); ++i)
    cp.model.theta()[i] = detail::hex_to_double(theta[i].get<std::string>());
  cp.seed = j.value("seed", std::uint64_t{0});
  cp.preprocess_ref = j.value("preprocess_ref", "");
  return cp;
}

}  // namespace fairdcov
