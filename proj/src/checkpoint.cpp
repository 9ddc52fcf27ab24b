#include "distillrank/checkpoint.hpp"

#include <cmath>
#include <cstring>

#include "distillrank/error.hpp"
#include "distillrank/hash.hpp"

namespace distillrank {

using nlohmann::json;

json mlp_config_to_json(const MlpConfig& config) {
  return json{{"layer_dims", config.layer_dims},
              {"activation", activation_name(config.activation)},
              {"init_scale", config.init_scale},
              {"seed", config.seed}};
}

MlpConfig mlp_config_from_json(const json& j) {
  MlpConfig c;
  try {
    c.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.init_scale = j.at("init_scale").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("mlp config: ") + e.what(), 0);
  }
  c.validate();
  return c;
}

std::string config_hash(const MlpConfig& config) { return content_hash(mlp_config_to_json(config).dump()); }

json checkpoint_to_json(const MlpConfig& config, const ParameterSet& params) {
  json layers = json::array();
  for (const auto& l : params.layers) {
    layers.push_back(json{{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}});
  }
  return json{{"format", "distillrank.checkpoint"},
              {"version", 1},
              {"config", mlp_config_to_json(config)},
              {"seed", config.seed},
              {"config_hash", config_hash(config)},
              {"layers", std::move(layers)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint ck;
  try {
    if (j.at("format").get<std::string>() != "distillrank.checkpoint") {
      throw ParseError("not a distillrank checkpoint", 0);
    }
    ck.config = mlp_config_from_json(j.at("config"));
    if (j.at("config_hash").get<std::string>() != config_hash(ck.config)) {
      throw ParseError("checkpoint config_hash does not match its config", 0);
    }
    ck.params = ParameterSet::zeros(ck.config);
    const auto& layers = j.at("layers");
    if (layers.size() != ck.params.layers.size()) throw ParseError("checkpoint layer count mismatch", 0);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& dst = ck.params.layers[l];
      auto w = layers[l].at("weights").get<std::vector<double>>();
      auto b = layers[l].at("bias").get<std::vector<double>>();
      if (w.size() != dst.weights.size() || b.size() != dst.bias.size()) {
        throw ParseError("checkpoint layer " + std::to_string(l) + " has wrong shape", 0);
      }
      dst.weights = std::move(w);
      dst.bias = std::move(b);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
  for (std::size_t i = 0; i < ck.params.num_values(); ++i) {
    if (!std::isfinite(ck.params.at(i))) throw ParseError("checkpoint contains non-finite parameter", 0);
  }
  return ck;
}

std::string parameter_hash(const ParameterSet& params) {
  std::uint64_t h = fnv1a64("");
  for (const auto& l : params.layers) {
    for (const auto* vec : {&l.weights, &l.bias}) {
      for (double v : *vec) {
        char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        h = fnv1a64(std::string_view(bytes, sizeof(double)), h);
      }
    }
  }
  return hex64(h);
}

}  // namespace distillrank
