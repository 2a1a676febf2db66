// Planted-bias synthetic data. Two independent binary protected attributes
// with two bias channels reaching the response only through noisy proxy
// features: a marginal channel tied to the first attribute, and an
// interaction channel tied to the attributes' parity. The parity is
// marginally independent of each attribute, so a per-attribute regulariser
// can remove the marginal channel but never the interaction channel.
#pragma once

#include <cstdint>
#include <string>

#include "fairdcov/preprocess.hpp"
#include "fairdcov/table.hpp"

namespace fairdcov {

struct PlantedBiasParams {
  std::size_t n = 4000;
  double marginal_strength = 1.8;     // first attribute's coefficient in the logit
  double interaction_strength = 1.0;  // parity coefficient in the logit
  double proxy_noise = 0.3;          // gaussian noise on both proxy features
  double feature_weight = 0.9;        // legitimate-signal strength
};

inline Table planted_bias_table(const PlantedBiasParams& params, std::uint64_t seed) {
  Rng rng(seed);
  Table t;
  t.columns = {"x1", "x2", "proxy_m", "proxy_i", "s1", "s2", "y"};
  t.rows.reserve(params.n);
  char buf[64];
  const auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < params.n; ++i) {
    const double x1 = rng.normal();
    const double x2 = rng.normal();
    const int s1 = rng.uniform() < 0.5 ? 1 : 0;
    const int s2 = rng.uniform() < 0.5 ? 1 : 0;
    const double marginal = 2.0 * s1 - 1.0;
    const double interaction = (s1 == s2) ? 1.0 : -1.0;
    const double proxy_m = marginal + params.proxy_noise * rng.normal();
    const double proxy_i = interaction + params.proxy_noise * rng.normal();
    const double logit = params.feature_weight * (x1 - 0.7 * x2) +
                         params.marginal_strength * marginal +
                         params.interaction_strength * interaction;
    const int y = rng.uniform() < 1.0 / (1.0 + std::exp(-logit)) ? 1 : 0;
    t.rows.push_back({fmt(x1), fmt(x2), fmt(proxy_m), fmt(proxy_i), std::to_string(s1),
                      std::to_string(s2), std::to_string(y)});
  }
  return t;
}

inline DatasetSchema planted_bias_schema() {
  DatasetSchema schema;
  schema.task = Task::binary;
  schema.recipe = Recipe::synthetic;
  schema.columns = {
      {"x1", ColumnRole::feature, Encoding::minmax},
      {"x2", ColumnRole::feature, Encoding::minmax},
      {"proxy_m", ColumnRole::feature, Encoding::minmax},
      {"proxy_i", ColumnRole::feature, Encoding::minmax},
      {"s1", ColumnRole::protected_attr, Encoding::none, ProtectedKind::binary, false},
      {"s2", ColumnRole::protected_attr, Encoding::none, ProtectedKind::binary, false},
      {"y", ColumnRole::response, Encoding::none},
  };
  return schema;
}

}  // namespace fairdcov
