#include <fstream>
#include <set>
#include <sstream>

#include "distillrank/error.hpp"
#include "distillrank/pipeline.hpp"

namespace distillrank {

using nlohmann::json;

namespace {

[[noreturn]] void type_error(const std::string& path, const char* expected) {
  throw ConfigError("field '" + path + "': expected " + expected);
}

void convert(const json& j, double& out, const std::string& path) {
  if (!j.is_number()) type_error(path, "a number");
  out = j.get<double>();
}

void convert(const json& j, std::size_t& out, const std::string& path) {
  if (!j.is_number_unsigned()) type_error(path, "a nonnegative integer");
  out = j.get<std::size_t>();
}

void convert(const json& j, bool& out, const std::string& path) {
  if (!j.is_boolean()) type_error(path, "true or false");
  out = j.get<bool>();
}

void convert(const json& j, std::string& out, const std::string& path) {
  if (!j.is_string()) type_error(path, "a string");
  out = j.get<std::string>();
}

template <typename T>
void convert(const json& j, std::vector<T>& out, const std::string& path) {
  if (!j.is_array()) type_error(path, "an array");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    T v{};
    convert(j[i], v, path + "[" + std::to_string(i) + "]");
    out.push_back(std::move(v));
  }
}

// Reads known keys of one JSON object and rejects the rest.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("field '" + (path_.empty() ? "<root>" : path_) + "': expected an object");
  }

  template <typename T>
  void read(const char* key, T& dst) {
    seen_.insert(key);
    if (obj_.contains(key)) convert(obj_.at(key), dst, join(key));
  }

  bool has(const char* key) const { return obj_.contains(key); }
  void skip(const char* key) { seen_.insert(key); }

  FieldReader child(const char* key) {
    seen_.insert(key);
    return FieldReader(obj_.at(key), join(key));
  }

  std::string join(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown field '" + join(key.c_str()) + "'");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

GeneratorConfig read_generator(FieldReader r) {
  GeneratorConfig g;
  r.read("num_queries", g.num_queries);
  r.read("items_min", g.items_min);
  r.read("items_max", g.items_max);
  r.read("m", g.m);
  r.read("K", g.K);
  std::size_t seed = g.seed;
  r.read("seed", seed);
  g.seed = seed;
  std::size_t first = g.first_query_id;
  r.read("first_query_id", first);
  g.first_query_id = first;
  r.read("num_days", g.num_days);
  r.read("booking_rate", g.booking_rate);
  r.read("utility_scale", g.utility_scale);
  r.read("utility_weights", g.utility_weights);
  r.read("objective_correlation", g.objective_correlation);
  r.read("label_rates", g.label_rates);
  r.read("new_item_fraction", g.new_item_fraction);
  r.skip("objectives");  // parsed by read_objectives
  r.finish();
  return g;
}

void read_objectives(const json& j, GeneratorConfig& g) {
  if (!j.contains("objectives")) return;
  const auto& arr = j.at("objectives");
  if (!arr.is_array()) type_error("generator.objectives", "an array");
  g.objectives.clear();
  for (std::size_t i = 0; i < arr.size(); ++i) {
    FieldReader r(arr[i], "generator.objectives[" + std::to_string(i) + "]");
    ObjectiveSpec o;
    o.index = i;
    std::string polarity = "reward";
    r.read("name", o.name);
    r.read("polarity", polarity);
    r.read("primary", o.primary);
    r.finish();
    try {
      o.polarity = parse_polarity(polarity);
    } catch (const ConfigError& e) {
      throw ConfigError("field '" + r.join("polarity") + "': " + e.what());
    }
    g.objectives.push_back(std::move(o));
  }
}

TrainConfig read_train(FieldReader r) {
  TrainConfig t;
  r.read("epochs", t.epochs);
  r.read("learning_rate", t.learning_rate);
  r.read("lr_decay", t.lr_decay);
  r.read("batch_size", t.batch_size);
  std::size_t seed = t.seed;
  r.read("seed", seed);
  t.seed = seed;
  r.read("hidden", t.hidden);
  std::string act = activation_name(t.activation);
  r.read("activation", act);
  try {
    t.activation = parse_activation(act);
  } catch (const ConfigError& e) {
    throw ConfigError("field '" + r.join("activation") + "': " + e.what());
  }
  r.read("init_scale", t.init_scale);
  r.finish();
  return t;
}

BoostRule read_boost(FieldReader r) {
  BoostRule b{BoostPredicate::kRatingAtLeast, 4.5, 1.0};
  std::string predicate = "rating_at_least";
  r.read("predicate", predicate);
  if (predicate == "rating_at_least") {
    b.predicate = BoostPredicate::kRatingAtLeast;
  } else if (predicate == "is_new") {
    b.predicate = BoostPredicate::kIsNew;
  } else {
    throw ConfigError("field '" + r.join("predicate") + "': expected rating_at_least or is_new");
  }
  r.read("rho", b.rho);
  r.read("beta", b.beta);
  r.finish();
  return b;
}

}  // namespace

GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig g = read_generator(FieldReader(j, "generator"));
  read_objectives(j, g);
  g.validate();
  return g;
}

json generator_config_to_json(const GeneratorConfig& g) {
  json objectives = json::array();
  for (const auto& o : g.objectives) {
    objectives.push_back(json{{"name", o.name}, {"polarity", polarity_name(o.polarity)}, {"primary", o.primary}});
  }
  json j{{"num_queries", g.num_queries},
         {"items_min", g.items_min},
         {"items_max", g.items_max},
         {"m", g.m},
         {"K", g.K},
         {"seed", g.seed},
         {"first_query_id", g.first_query_id},
         {"num_days", g.num_days},
         {"booking_rate", g.booking_rate},
         {"utility_scale", g.utility_scale},
         {"objective_correlation", g.objective_correlation},
         {"label_rates", g.label_rates},
         {"new_item_fraction", g.new_item_fraction}};
  if (!g.utility_weights.empty()) j["utility_weights"] = g.utility_weights;
  if (!objectives.empty()) j["objectives"] = objectives;
  return j;
}

void ExperimentConfig::validate() const {
  generator.validate();
  train.validate();
  distill.validate();
  if (test_queries == 0) throw ConfigError("test_queries must be positive");
  if (seeds == 0) throw ConfigError("seeds must be positive");
  if (repro_seeds < 2) throw ConfigError("repro_seeds must be at least 2 for the irreproducibility study");
  if (exposure_k == 0 || boost_k == 0) throw ConfigError("exposure depths must be positive");
  if (!(tau_threshold >= 0.0)) throw ConfigError("tau_threshold must be nonnegative");
  for (double a : alpha_sweep) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha_sweep values must lie in [0, 1]");
  }
  if (!fusion_weights.empty() && fusion_weights.size() != generator.K) throw ConfigError("fusion_weights needs K entries");
  if (!scalarized_weights.empty() && scalarized_weights.size() != generator.K) {
    throw ConfigError("scalarized_weights needs K entries");
  }
  boost.validate();
  if (!(exposure_tolerance > 0.0)) throw ConfigError("exposure_tolerance must be positive");
  if (!(gamma_max > 0.0)) throw ConfigError("gamma_max must be positive");
  if (window_days == 0) throw ConfigError("window_days must be positive");
  if (generations == 0) throw ConfigError("generations must be at least 1");
}

DistillConfig ExperimentConfig::distill_for(std::uint64_t seed, double alpha) const {
  DistillConfig d = distill;
  d.alpha = alpha;
  d.train = train_for(seed);
  return d;
}

TrainConfig ExperimentConfig::train_for(std::uint64_t seed) const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  FieldReader r(j, "");
  if (r.has("generator")) {
    r.skip("generator");
    c.generator = read_generator(FieldReader(j.at("generator"), "generator"));
    read_objectives(j.at("generator"), c.generator);
  }
  r.read("test_queries", c.test_queries);
  if (r.has("train")) c.train = read_train(r.child("train"));
  if (r.has("distill")) {
    FieldReader d = r.child("distill");
    d.read("alpha", c.distill.alpha);
    d.read("temperature", c.distill.temperature);
    d.read("teacher_temperature", c.distill.teacher_temperature);
    d.finish();
  }
  r.read("fusion_weights", c.fusion_weights);
  r.read("scalarized_weights", c.scalarized_weights);
  r.read("alpha_sweep", c.alpha_sweep);
  r.read("seeds", c.seeds);
  r.read("repro_seeds", c.repro_seeds);
  r.read("exposure_k", c.exposure_k);
  r.read("tau_threshold", c.tau_threshold);
  r.read("sxs_depth", c.sxs_depth);
  if (r.has("boost")) c.boost = read_boost(r.child("boost"));
  r.read("boost_k", c.boost_k);
  r.read("exposure_tolerance", c.exposure_tolerance);
  r.read("max_calibration_iterations", c.max_calibration_iterations);
  r.read("gamma_max", c.gamma_max);
  r.read("window_days", c.window_days);
  r.read("shift_days", c.shift_days);
  r.read("generations", c.generations);
  r.read("out_dir", c.out_dir);
  r.read("persist_datasets", c.persist_datasets);
  r.finish();
  c.validate();
  return c;
}

json experiment_config_to_json(const ExperimentConfig& c) {
  const char* predicate = c.boost.predicate == BoostPredicate::kIsNew ? "is_new" : "rating_at_least";
  return json{{"generator", generator_config_to_json(c.generator)},
              {"test_queries", c.test_queries},
              {"train",
               {{"epochs", c.train.epochs},
                {"learning_rate", c.train.learning_rate},
                {"lr_decay", c.train.lr_decay},
                {"batch_size", c.train.batch_size},
                {"seed", c.train.seed},
                {"hidden", c.train.hidden},
                {"activation", activation_name(c.train.activation)},
                {"init_scale", c.train.init_scale}}},
              {"distill",
               {{"alpha", c.distill.alpha},
                {"temperature", c.distill.temperature},
                {"teacher_temperature", c.distill.teacher_temperature}}},
              {"fusion_weights", c.fusion_weights},
              {"scalarized_weights", c.scalarized_weights},
              {"alpha_sweep", c.alpha_sweep},
              {"seeds", c.seeds},
              {"repro_seeds", c.repro_seeds},
              {"exposure_k", c.exposure_k},
              {"tau_threshold", c.tau_threshold},
              {"sxs_depth", c.sxs_depth},
              {"boost", {{"predicate", predicate}, {"rho", c.boost.rho}, {"beta", c.boost.beta}}},
              {"boost_k", c.boost_k},
              {"exposure_tolerance", c.exposure_tolerance},
              {"max_calibration_iterations", c.max_calibration_iterations},
              {"gamma_max", c.gamma_max},
              {"window_days", c.window_days},
              {"shift_days", c.shift_days},
              {"generations", c.generations},
              {"out_dir", c.out_dir},
              {"persist_datasets", c.persist_datasets}};
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < upto; ++i) line += text[i] == '\n' ? 1 : 0;
    throw ParseError(source + ": invalid JSON: " + e.what(), line);
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return experiment_config_from_json(parse_json_text(buf.str(), path));
}

}  // namespace distillrank
