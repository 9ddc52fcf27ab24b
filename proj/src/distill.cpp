#include "distillrank/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "distillrank/checkpoint.hpp"
#include "distillrank/error.hpp"
#include "distillrank/hash.hpp"
#include "distillrank/kernels.hpp"

namespace distillrank {

using nlohmann::json;

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kTeacher: return "teacher";
    case ModelKind::kStudent: return "student";
    case ModelKind::kScalarizedBaseline: return "scalarized_baseline";
    case ModelKind::kHardOnly: return "hard_only";
  }
  return "unknown";
}

namespace {

ModelKind parse_model_kind(const std::string& s) {
  for (auto k : {ModelKind::kTeacher, ModelKind::kStudent, ModelKind::kScalarizedBaseline, ModelKind::kHardOnly}) {
    if (s == model_kind_name(k)) return k;
  }
  throw ParseError("unknown model kind '" + s + "'", 0);
}

std::string student_step(int version) { return "student_v" + std::to_string(version); }

void check_dims(const Model& model, const Dataset& dataset) {
  if (model.config.input_dim() != dataset.m) {
    throw InputError("model input dim " + std::to_string(model.config.input_dim()) + " does not match dataset m " +
                     std::to_string(dataset.m));
  }
}

}  // namespace

json model_to_json(const Model& model) {
  json j = checkpoint_to_json(model.config, model.params);
  j["lineage"] = json{{"kind", model_kind_name(model.lineage.kind)},
                      {"objective", model.lineage.objective},
                      {"version", model.lineage.version},
                      {"chain", model.lineage.chain},
                      {"parent_hash", model.lineage.parent_hash}};
  return j;
}

Model model_from_json(const json& j) {
  Checkpoint ck = checkpoint_from_json(j);
  Model m{std::move(ck.config), std::move(ck.params), {}};
  try {
    const auto& l = j.at("lineage");
    m.lineage.kind = parse_model_kind(l.at("kind").get<std::string>());
    m.lineage.objective = l.at("objective").get<int>();
    m.lineage.version = l.at("version").get<int>();
    m.lineage.chain = l.at("chain").get<std::vector<std::string>>();
    m.lineage.parent_hash = l.at("parent_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("model lineage: ") + e.what(), 0);
  }
  return m;
}

std::string Model::hash() const { return content_hash(model_to_json(*this).dump()); }

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << model_to_json(model).dump() << '\n';
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return model_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

bool lineage_is_consistent(const Lineage& lineage) {
  std::set<std::string> seen;
  int last_version = -1;
  for (const auto& step : lineage.chain) {
    if (!seen.insert(step).second) return false;
    if (step.rfind("student_v", 0) == 0) {
      const int v = std::stoi(step.substr(9));
      if (v <= last_version) return false;
      last_version = v;
    }
  }
  if (lineage.kind == ModelKind::kStudent) {
    return !lineage.chain.empty() && lineage.chain.back() == student_step(lineage.version);
  }
  return true;
}

std::vector<double> TeacherEnsemble::normalized_weights() const {
  if (weights.size() != models.size()) throw ConfigError("need one fusion weight per teacher");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("fusion weights must be nonnegative");
    sum += w;
  }
  if (!(sum > 0.0)) throw ConfigError("fusion weights sum to zero");
  std::vector<double> out(weights);
  for (auto& w : out) w /= sum;
  return out;
}

std::string SoftLabelProvenance::describe() const {
  switch (source) {
    case SoftLabelSource::kTeacherFusion: return "teacher_fusion";
    case SoftLabelSource::kSelfDistill: return "self_distill(" + std::to_string(version) + ")";
    case SoftLabelSource::kBoosted: return "boosted(" + rule + ")";
  }
  return "unknown";
}

void SoftLabelSet::check_aligned(const Dataset& dataset) const {
  if (groups.size() != dataset.groups.size()) {
    throw InputError("soft labels cover " + std::to_string(groups.size()) + " groups, dataset has " +
                     std::to_string(dataset.groups.size()));
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].query_id != dataset.groups[i].query_id || groups[i].scores.size() != dataset.groups[i].size()) {
      throw InputError("soft labels misaligned at query " + std::to_string(dataset.groups[i].query_id));
    }
  }
}

SoftLabelSet make_soft_labels(const Dataset& dataset, std::vector<std::vector<double>> scores, double temperature,
                              SoftLabelProvenance provenance) {
  if (scores.size() != dataset.groups.size()) throw InputError("one score vector per group required");
  SoftLabelSet soft;
  soft.temperature = temperature;
  soft.provenance = std::move(provenance);
  soft.groups.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    SoftLabelGroup g;
    g.query_id = dataset.groups[i].query_id;
    g.distribution = listwise_softmax(scores[i], temperature);
    g.scores = std::move(scores[i]);
    soft.groups.push_back(std::move(g));
  }
  soft.check_aligned(dataset);
  return soft;
}

void BoostRule::validate() const {
  if (!(rho >= 0.0 && rho <= 5.0)) throw ConfigError("boost rho must lie in [0, 5]");
  if (!std::isfinite(beta)) throw ConfigError("boost must be finite");
}

bool BoostRule::matches(const Item& item) const {
  return predicate == BoostPredicate::kIsNew ? item.is_new : (!item.is_new && item.review_rating >= rho);
}

std::string BoostRule::describe() const {
  std::ostringstream s;
  if (predicate == BoostPredicate::kIsNew) {
    s << "is_new";
  } else {
    s << "rating_at_least(" << rho << ")";
  }
  s << ",beta=" << beta;
  return s.str();
}

void DistillConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be positive");
  if (!(teacher_temperature > 0.0) || !std::isfinite(teacher_temperature)) {
    throw ConfigError("teacher_temperature must be positive");
  }
  train.validate();
}

std::vector<Matrix> feature_matrices(const Dataset& dataset) {
  std::vector<Matrix> out;
  out.reserve(dataset.groups.size());
  for (const auto& g : dataset.groups) out.push_back(g.feature_matrix());
  return out;
}

namespace {

struct ScalarizedTerms {
  std::vector<double> weights;                                 // per objective
  std::vector<std::vector<std::optional<LabelDistribution>>> targets;  // [group][objective]
};

// Shared by teachers and the scalarized baseline so a one-hot weight vector
// reproduces a teacher exactly.
Model train_weighted_objectives(const Dataset& dataset, std::span<const double> objective_weights,
                                const TrainConfig& config, TrainingLog* log, Lineage lineage) {
  dataset.validate();
  if (objective_weights.size() != dataset.K) throw ConfigError("need one weight per objective");
  bool any = false;
  for (double w : objective_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("objective weights must be nonnegative");
    any = any || w > 0.0;
  }
  if (!any) throw ConfigError("objective weights are all zero");

  // A group trains only if some weighted objective yields a usable target there.
  std::vector<Matrix> features;
  ScalarizedTerms terms;
  terms.weights.assign(objective_weights.begin(), objective_weights.end());
  for (const auto& g : dataset.groups) {
    std::vector<std::optional<LabelDistribution>> row(dataset.K);
    bool usable = false;
    for (std::size_t k = 0; k < dataset.K; ++k) {
      if (objective_weights[k] > 0.0 && g.has_label(k)) row[k] = objective_target(dataset, g, k);
      usable = usable || row[k].has_value();
    }
    if (!usable) continue;
    features.push_back(g.feature_matrix());
    terms.targets.push_back(std::move(row));
  }
  if (features.empty()) throw TrainingError("no query group carries a usable label for the weighted objectives");

  if (log) {
    log->objective_groups.assign(dataset.K, 0);
    log->objective_batches.assign(dataset.K, 0);
    for (const auto& row : terms.targets) {
      for (std::size_t k = 0; k < dataset.K; ++k) log->objective_groups[k] += row[k] ? 1 : 0;
    }
  }

  const kernels::GroupLoss loss = [&terms](std::size_t group, std::span<const double> scores) {
    LossAndGrad out;
    const auto& row = terms.targets[group];
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (!row[k]) continue;
      const LossAndGrad ce = listwise_ce(scores, *row[k], 1.0);
      if (out.grad.empty()) out.grad.assign(scores.size(), 0.0);
      out.loss += terms.weights[k] * ce.loss;
      for (std::size_t p = 0; p < scores.size(); ++p) out.grad[p] += terms.weights[k] * ce.grad[p];
    }
    return out;
  };

  BatchObserver observer;
  if (log) {
    observer = [&terms, log](std::span<const std::size_t> batch) {
      for (std::size_t k = 0; k < terms.weights.size(); ++k) {
        const bool touched =
            std::any_of(batch.begin(), batch.end(), [&](std::size_t g) { return terms.targets[g][k].has_value(); });
        log->objective_batches[k] += touched ? 1 : 0;
      }
    };
  }
  const MlpConfig mlp = config.mlp_for(dataset.m);
  Model model{mlp, train_loop(mlp, features, loss, config, log, observer), std::move(lineage)};

  return model;
}

}  // namespace

Model train_teacher(const Dataset& dataset, std::size_t objective, const TrainConfig& config, TrainingLog* log) {
  if (objective >= dataset.K) throw InputError("objective index out of range");
  if (label_coverage(dataset, objective) == 0.0) {
    throw TrainingError("objective " + std::to_string(objective) + " has no labels");
  }
  std::vector<double> one_hot(dataset.K, 0.0);
  one_hot[objective] = 1.0;
  Lineage lineage;
  lineage.kind = ModelKind::kTeacher;
  lineage.objective = static_cast<int>(objective);
  lineage.chain = {"teacher_" + std::to_string(objective)};
  return train_weighted_objectives(dataset, one_hot, config, log, std::move(lineage));
}

Model train_scalarized_baseline(const Dataset& dataset, std::span<const double> objective_weights,
                                const TrainConfig& config, TrainingLog* log) {
  Lineage lineage;
  lineage.kind = ModelKind::kScalarizedBaseline;
  lineage.chain = {"scalarized_baseline"};
  return train_weighted_objectives(dataset, objective_weights, config, log, std::move(lineage));
}

TeacherEnsemble train_teachers(const Dataset& dataset, const TrainConfig& config, std::vector<double> weights) {
  TeacherEnsemble ens;
  for (std::size_t k = 0; k < dataset.K; ++k) {
    TrainConfig c = config;
    c.seed = config.seed + 1000 * (k + 1);
    ens.models.push_back(train_teacher(dataset, k, c));
  }
  ens.weights = weights.empty() ? std::vector<double>(dataset.K, 1.0 / static_cast<double>(dataset.K))
                                : std::move(weights);
  ens.normalized_weights();
  return ens;
}

std::vector<std::vector<double>> score_dataset(const Model& model, const Dataset& dataset) {
  check_dims(model, dataset);
  const auto features = feature_matrices(dataset);
  return kernels::score_groups_parallel(model.params, model.config.activation, features);
}

std::vector<double> fusion_serve_scores(const TeacherEnsemble& teachers, const QueryGroup& group) {
  const auto w = teachers.normalized_weights();
  const Matrix x = group.feature_matrix();
  std::vector<double> fused(group.size(), 0.0);
  for (std::size_t k = 0; k < teachers.models.size(); ++k) {
    const auto& t = teachers.models[k];
    if (t.config.input_dim() != x.cols) throw InputError("teacher input dim does not match group features");
    const auto z = mlp_scores(t.params, t.config.activation, x);
    for (std::size_t p = 0; p < z.size(); ++p) fused[p] += w[k] * z[p];
  }
  return fused;
}

SoftLabelSet fuse_soft_labels(const TeacherEnsemble& teachers, const Dataset& dataset, double teacher_temperature) {
  const auto w = teachers.normalized_weights();
  for (const auto& t : teachers.models) check_dims(t, dataset);
  std::vector<std::vector<double>> fused(dataset.groups.size());
  for (std::size_t i = 0; i < fused.size(); ++i) fused[i].assign(dataset.groups[i].size(), 0.0);
  for (std::size_t k = 0; k < teachers.models.size(); ++k) {
    const auto z = score_dataset(teachers.models[k], dataset);
    for (std::size_t i = 0; i < z.size(); ++i) {
      for (std::size_t p = 0; p < z[i].size(); ++p) fused[i][p] += w[k] * z[i][p];
    }
  }
  SoftLabelProvenance prov;
  prov.source = SoftLabelSource::kTeacherFusion;
  prov.chain = {"teacher_fusion"};
  return make_soft_labels(dataset, std::move(fused), teacher_temperature, std::move(prov));
}

std::vector<SoftLabelSet> teacher_soft_labels(const TeacherEnsemble& teachers, const Dataset& dataset,
                                              double teacher_temperature) {
  std::vector<SoftLabelSet> out;
  for (const auto& t : teachers.models) {
    SoftLabelProvenance prov;
    prov.chain = {"teacher_" + std::to_string(t.lineage.objective)};
    out.push_back(make_soft_labels(dataset, score_dataset(t, dataset), teacher_temperature, std::move(prov)));
  }
  return out;
}

SoftLabelSet fuse_distributions(std::span<const SoftLabelSet> per_teacher, std::span<const double> weights) {
  if (per_teacher.empty() || per_teacher.size() != weights.size()) throw InputError("one weight per soft set required");
  double sum = 0.0;
  for (double w : weights) sum += w;
  if (!(sum > 0.0)) throw ConfigError("fusion weights sum to zero");
  SoftLabelSet out;
  out.temperature = per_teacher.front().temperature;
  out.provenance.chain = {"teacher_fusion"};
  for (std::size_t i = 0; i < per_teacher.front().groups.size(); ++i) {
    const std::size_t n = per_teacher.front().groups[i].scores.size();
    std::vector<double> mix(n, 0.0);
    for (std::size_t k = 0; k < per_teacher.size(); ++k) {
      const auto& g = per_teacher[k].groups.at(i);
      if (g.scores.size() != n) throw InputError("soft label sets are misaligned");
      for (std::size_t p = 0; p < n; ++p) mix[p] += weights[k] / sum * g.distribution[p];
    }
    SoftLabelGroup g;
    g.query_id = per_teacher.front().groups[i].query_id;
    // Log-probabilities keep the raw-score form consistent with the distribution.
    g.scores.resize(n);
    for (std::size_t p = 0; p < n; ++p) g.scores[p] = std::log(std::max(mix[p], kProbabilityFloor));
    g.distribution = LabelDistribution::from_weights(mix);
    out.groups.push_back(std::move(g));
  }
  return out;
}

SoftLabelSet inject_boost(const SoftLabelSet& soft, const BoostRule& rule, const Dataset& dataset) {
  rule.validate();
  soft.check_aligned(dataset);
  std::vector<std::vector<double>> scores;
  scores.reserve(soft.groups.size());
  for (std::size_t i = 0; i < soft.groups.size(); ++i) {
    std::vector<double> s = soft.groups[i].scores;
    for (std::size_t p = 0; p < s.size(); ++p) {
      if (rule.matches(dataset.groups[i].items[p])) s[p] += rule.beta;
    }
    scores.push_back(std::move(s));
  }
  SoftLabelProvenance prov = soft.provenance;
  prov.source = SoftLabelSource::kBoosted;
  prov.rule = rule.describe();
  prov.chain.push_back(prov.describe());
  return make_soft_labels(dataset, std::move(scores), soft.temperature, std::move(prov));
}

namespace {

Lineage student_lineage(const SoftLabelProvenance& prov) {
  Lineage l;
  l.kind = ModelKind::kStudent;
  l.version = prov.version;
  l.chain = prov.chain;
  l.chain.push_back(student_step(prov.version));
  return l;
}

std::vector<std::optional<LabelDistribution>> hard_targets(const Dataset& dataset) {
  const std::size_t primary = dataset.primary_index();
  std::vector<std::optional<LabelDistribution>> out;
  out.reserve(dataset.groups.size());
  for (const auto& g : dataset.groups) out.push_back(objective_target(dataset, g, primary));
  return out;
}

}  // namespace

Model train_student(const Dataset& dataset, const SoftLabelSet& soft, const DistillConfig& config, TrainingLog* log) {
  config.validate();
  dataset.validate();
  if (dataset.groups.empty()) throw TrainingError("cannot train a student on an empty dataset");
  soft.check_aligned(dataset);
  const auto hard = hard_targets(dataset);
  const auto features = feature_matrices(dataset);
  const kernels::GroupLoss loss = [&](std::size_t group, std::span<const double> scores) {
    const auto& h = hard[group];
    return distill_loss(scores, h ? &*h : nullptr, soft.groups[group].distribution, config.alpha, config.temperature);
  };
  const MlpConfig mlp = config.train.mlp_for(dataset.m);
  return Model{mlp, train_loop(mlp, features, loss, config.train, log), student_lineage(soft.provenance)};
}

Model train_student_multi_soft(const Dataset& dataset, std::span<const SoftLabelSet> soft,
                               std::span<const double> weights, const DistillConfig& config, TrainingLog* log) {
  config.validate();
  dataset.validate();
  if (dataset.groups.empty()) throw TrainingError("cannot train a student on an empty dataset");
  if (soft.size() != weights.size() || soft.empty()) throw InputError("one weight per soft label set required");
  for (const auto& s : soft) s.check_aligned(dataset);
  double sum = 0.0;
  for (double w : weights) sum += w;
  const auto hard = hard_targets(dataset);
  const auto features = feature_matrices(dataset);
  const kernels::GroupLoss loss = [&](std::size_t group, std::span<const double> scores) {
    const auto& h = hard[group];
    LossAndGrad out;
    out.grad.assign(scores.size(), 0.0);
    if (h && config.alpha != 0.0) {
      const LossAndGrad hl = listwise_ce(scores, *h, 1.0);
      out.loss += config.alpha * hl.loss;
      for (std::size_t p = 0; p < scores.size(); ++p) out.grad[p] += config.alpha * hl.grad[p];
    }
    if (config.alpha != 1.0) {
      for (std::size_t k = 0; k < soft.size(); ++k) {
        const double w = (1.0 - config.alpha) * weights[k] / sum;
        const LossAndGrad sl = listwise_ce(scores, soft[k].groups[group].distribution, config.temperature);
        out.loss += w * sl.loss;
        for (std::size_t p = 0; p < scores.size(); ++p) out.grad[p] += w * sl.grad[p];
      }
    }
    return out;
  };
  const MlpConfig mlp = config.train.mlp_for(dataset.m);
  SoftLabelProvenance prov;
  prov.chain = {"teacher_fusion"};
  return Model{mlp, train_loop(mlp, features, loss, config.train, log), student_lineage(prov)};
}

Model train_hard_only(const Dataset& dataset, const TrainConfig& config, TrainingLog* log) {
  dataset.validate();
  if (dataset.groups.empty()) throw TrainingError("cannot train on an empty dataset");
  const auto hard = hard_targets(dataset);
  const auto features = feature_matrices(dataset);
  const kernels::GroupLoss loss = [&](std::size_t group, std::span<const double> scores) {
    const auto& h = hard[group];
    if (!h) return LossAndGrad{0.0, std::vector<double>(scores.size(), 0.0)};
    return listwise_ce(scores, *h, 1.0);
  };
  const MlpConfig mlp = config.mlp_for(dataset.m);
  Lineage lineage;
  lineage.kind = ModelKind::kHardOnly;
  lineage.chain = {"hard_only"};
  return Model{mlp, train_loop(mlp, features, loss, config, log), std::move(lineage)};
}

Model self_distill_step(const Model& prev, const Dataset& dataset_new, const DistillConfig& config, TrainingLog* log) {
  check_dims(prev, dataset_new);
  SoftLabelProvenance prov;
  prov.source = SoftLabelSource::kSelfDistill;
  prov.version = prev.lineage.version + 1;
  prov.chain = prev.lineage.chain;
  prov.chain.push_back(prov.describe());
  const SoftLabelSet soft =
      make_soft_labels(dataset_new, score_dataset(prev, dataset_new), config.teacher_temperature, std::move(prov));
  Model next = train_student(dataset_new, soft, config, log);
  next.lineage.parent_hash = prev.hash();
  return next;
}

}  // namespace distillrank
