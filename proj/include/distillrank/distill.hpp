#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distillrank/data.hpp"
#include "distillrank/loss.hpp"
#include "distillrank/nn.hpp"
#include "distillrank/training.hpp"
#include "json.hpp"

namespace distillrank {

enum class ModelKind { kTeacher, kStudent, kScalarizedBaseline, kHardOnly };

const char* model_kind_name(ModelKind kind);

/// How a model came to be. `chain` lists every step from the first soft-label
/// source to this model, e.g. {"teacher_fusion", "student_v0", "self_distill(1)", "student_v1"}.
struct Lineage {
  ModelKind kind = ModelKind::kStudent;
  int objective = -1;  // teachers only
  int version = 0;     // students only
  std::vector<std::string> chain;
  std::string parent_hash;  // previous student for self-distillation
  bool operator==(const Lineage&) const = default;
};

struct Model {
  MlpConfig config;
  ParameterSet params;
  Lineage lineage;

  std::uint64_t seed() const { return config.seed; }
  /// Hash of the serialized checkpoint.
  std::string hash() const;
  bool operator==(const Model&) const = default;
};

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

/// Checks that the lineage chain never repeats a step and student versions only grow.
bool lineage_is_consistent(const Lineage& lineage);

/// Per-objective frozen models and their fusion weights.
struct TeacherEnsemble {
  std::vector<Model> models;
  std::vector<double> weights;

  /// Weights divided by their sum. Throws ConfigError on negative or all-zero weights.
  std::vector<double> normalized_weights() const;
};

enum class SoftLabelSource { kTeacherFusion, kSelfDistill, kBoosted };

struct SoftLabelProvenance {
  SoftLabelSource source = SoftLabelSource::kTeacherFusion;
  int version = 0;      // self_distill(version)
  std::string rule;     // boosted(rule)
  std::vector<std::string> chain;

  std::string describe() const;
  bool operator==(const SoftLabelProvenance&) const = default;
};

struct SoftLabelGroup {
  std::uint64_t query_id = 0;
  std::vector<double> scores;
  LabelDistribution distribution;
  bool operator==(const SoftLabelGroup&) const = default;
};

/// Soft targets aligned 1:1 with a dataset's query groups. The distribution form
/// is softmax(scores / temperature) per group.
struct SoftLabelSet {
  std::vector<SoftLabelGroup> groups;
  double temperature = 1.0;
  SoftLabelProvenance provenance;

  /// Throws InputError unless query ids and item counts match the dataset.
  void check_aligned(const Dataset& dataset) const;
  bool operator==(const SoftLabelSet&) const = default;
};

/// Builds a SoftLabelSet from raw per-group scores.
SoftLabelSet make_soft_labels(const Dataset& dataset, std::vector<std::vector<double>> scores, double temperature,
                              SoftLabelProvenance provenance);

void write_soft_labels(const SoftLabelSet& soft, std::ostream& out);
SoftLabelSet read_soft_labels(std::istream& in);
void save_soft_labels(const SoftLabelSet& soft, const std::string& path);
SoftLabelSet load_soft_labels(const std::string& path);

enum class BoostPredicate { kRatingAtLeast, kIsNew };

struct BoostRule {
  BoostPredicate predicate = BoostPredicate::kRatingAtLeast;
  double rho = 4.5;   // rating threshold
  double beta = 0.0;  // soft-label boost, or serving boost when used for serving

  void validate() const;
  bool matches(const Item& item) const;
  std::string describe() const;
  bool operator==(const BoostRule&) const = default;
};

struct DistillConfig {
  double alpha = 0.2;
  double temperature = 1.0;          // student side, soft term only
  double teacher_temperature = 1.0;  // softmax applied to fused teacher scores
  TrainConfig train;

  void validate() const;
  bool operator==(const DistillConfig&) const = default;
};

/// Feature matrices of every group, in dataset order.
std::vector<Matrix> feature_matrices(const Dataset& dataset);

/// Listwise CE on objective k over the groups carrying a label for k.
Model train_teacher(const Dataset& dataset, std::size_t objective, const TrainConfig& config,
                    TrainingLog* log = nullptr);

/// Trains one teacher per objective; weights default to uniform.
TeacherEnsemble train_teachers(const Dataset& dataset, const TrainConfig& config,
                               std::vector<double> weights = {});

/// sum_k w_k z_k with the teachers' raw scores; teachers are only read.
std::vector<double> fusion_serve_scores(const TeacherEnsemble& teachers, const QueryGroup& group);

/// Raw-score fusion per group, then softmax with `teacher_temperature`.
SoftLabelSet fuse_soft_labels(const TeacherEnsemble& teachers, const Dataset& dataset,
                              double teacher_temperature = 1.0);

/// Per-teacher soft labels (one SoftLabelSet per teacher, unfused).
std::vector<SoftLabelSet> teacher_soft_labels(const TeacherEnsemble& teachers, const Dataset& dataset,
                                              double teacher_temperature = 1.0);

/// sum_k w_k softmax(z_k): fusion in distribution space.
SoftLabelSet fuse_distributions(std::span<const SoftLabelSet> per_teacher, std::span<const double> weights);

/// Adds beta to the raw soft score of every matching item and re-normalizes.
SoftLabelSet inject_boost(const SoftLabelSet& soft, const BoostRule& rule, const Dataset& dataset);

/// alpha * hard listwise CE (primary labels) + (1 - alpha) * soft CE at temperature.
Model train_student(const Dataset& dataset, const SoftLabelSet& soft, const DistillConfig& config,
                    TrainingLog* log = nullptr);

/// Student trained against several soft targets, sum_k w_k CE(f, soft_k), plus the hard term.
Model train_student_multi_soft(const Dataset& dataset, std::span<const SoftLabelSet> soft,
                               std::span<const double> weights, const DistillConfig& config,
                               TrainingLog* log = nullptr);

/// Primary-label listwise CE only, over every group (unlabeled groups add zero gradient).
Model train_hard_only(const Dataset& dataset, const TrainConfig& config, TrainingLog* log = nullptr);

/// Scores `dataset_new` with `prev` and trains a fresh student on those soft labels.
Model self_distill_step(const Model& prev, const Dataset& dataset_new, const DistillConfig& config,
                        TrainingLog* log = nullptr);

/// One model minimizing sum_k w_k CE_k over groups where objective k is labeled.
Model train_scalarized_baseline(const Dataset& dataset, std::span<const double> objective_weights,
                                const TrainConfig& config, TrainingLog* log = nullptr);

std::vector<std::vector<double>> score_dataset(const Model& model, const Dataset& dataset);

}  // namespace distillrank
