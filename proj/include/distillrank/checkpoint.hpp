#pragma once

#include <string>

#include "distillrank/nn.hpp"
#include "json.hpp"

namespace distillrank {

nlohmann::json mlp_config_to_json(const MlpConfig& config);
MlpConfig mlp_config_from_json(const nlohmann::json& j);

/// Stable hash of the MLP configuration (dims, activation, init scale, seed).
std::string config_hash(const MlpConfig& config);

/// Checkpoint document: config, per-layer flattened row-major weights and biases,
/// seed and config hash.
nlohmann::json checkpoint_to_json(const MlpConfig& config, const ParameterSet& params);

struct Checkpoint {
  MlpConfig config;
  ParameterSet params;
};

/// Validates shapes, finiteness and the stored config hash.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Stable hash of the parameter values.
std::string parameter_hash(const ParameterSet& params);

}  // namespace distillrank
