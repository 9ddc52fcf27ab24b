#pragma once

#include <functional>
#include <string>
#include <vector>

#include "distillrank/data.hpp"
#include "distillrank/distill.hpp"
#include "distillrank/metrics.hpp"
#include "json.hpp"

namespace distillrank {

/// Everything a study needs. Loaded from one JSON file; CLI flags override fields.
struct ExperimentConfig {
  GeneratorConfig generator;
  std::size_t test_queries = 1000;
  TrainConfig train;
  DistillConfig distill;  // alpha and temperatures; optimizer settings come from `train`
  std::vector<double> fusion_weights;      // empty: uniform
  std::vector<double> scalarized_weights;  // empty: uniform
  std::vector<double> alpha_sweep = {0.0, 0.2, 0.5, 1.0};

  std::size_t seeds = 3;        // data seeds averaged by the self-distillation and boost studies
  std::size_t repro_seeds = 4;  // init seeds per family in the irreproducibility study

  std::size_t exposure_k = 10;
  double tau_threshold = 0.02;
  std::size_t sxs_depth = 0;  // 0: whole page

  BoostRule boost{BoostPredicate::kRatingAtLeast, 4.5, 1.0};
  std::size_t boost_k = 5;
  double exposure_tolerance = 0.01;
  std::size_t max_calibration_iterations = 50;
  double gamma_max = 64.0;

  std::size_t window_days = 8;
  std::size_t shift_days = 2;
  std::size_t generations = 2;

  std::string out_dir = "distillrank_out";
  bool persist_datasets = true;

  void validate() const;
  /// Student settings: `distill` with the optimizer from `train` and the given seed.
  DistillConfig distill_for(std::uint64_t seed, double alpha) const;
  TrainConfig train_for(std::uint64_t seed) const;
};

/// Throws ConfigError naming the offending field.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);
/// Throws ParseError with the line of a JSON syntax error.
nlohmann::json parse_json_text(const std::string& text, const std::string& source);
ExperimentConfig load_experiment_config(const std::string& path);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);
nlohmann::json generator_config_to_json(const GeneratorConfig& config);

/// Content-addressed store for checkpoints and datasets under `root`.
class ArtifactStore {
 public:
  explicit ArtifactStore(std::string root, bool persist_datasets = true);
  /// Writes checkpoints/<hash>.json and returns the hash.
  std::string put_model(const Model& model);
  /// Writes datasets/<hash>.jsonl (when persisting) and returns the hash.
  std::string put_dataset(const Dataset& dataset);
  const std::string& root() const { return root_; }

 private:
  std::string root_;
  bool persist_datasets_;
};

struct MetricRow {
  std::string arm;
  std::uint64_t seed = 0;
  QueryMetrics metrics;
};

struct ExperimentReport {
  std::string study;
  nlohmann::json body;  // full machine-readable report
  std::vector<MetricRow> rows;
};

nlohmann::json metrics_to_json(const RankingMetricsReport& report);
nlohmann::json sxs_to_json(const SxSReport& report);

/// Teachers, fusion serving, scalarized, hard-only and distilled students on a held-out split.
ExperimentReport study_distill_vs_baselines(const ExperimentConfig& config, ArtifactStore& store);
/// V0 from teachers, V1 self-distilled on a shifted window, V0 retrained from teachers on that window.
ExperimentReport study_self_distillation(const ExperimentConfig& config, ArtifactStore& store);
/// Pairwise SxS change rate and PD within hard-only and distilled families.
ExperimentReport study_irreproducibility(const ExperimentConfig& config, ArtifactStore& store);
/// Serving-time boost vs soft-label boost at matched boosted-item exposure.
ExperimentReport study_adhoc_boost(const ExperimentConfig& config, ArtifactStore& store);

struct GammaCalibration {
  double gamma = 0.0;
  double exposure = 0.0;
  std::size_t iterations = 0;
};

/// Bisects the serving boost gamma until exposure_at(gamma) is as close to `target`
/// as the search resolves, starting from [0, gamma_max] and widening when needed.
/// Throws InternalError if exposure ever decreases in gamma and CalibrationError
/// when the best match is farther than `tolerance` after `max_iterations` probes.
GammaCalibration calibrate_serving_gamma(const std::function<double(double)>& exposure_at, double target,
                                         double tolerance, double gamma_max, std::size_t max_iterations);

/// Writes report.json, report.md and metrics.csv into `dir`.
void write_report(const ExperimentReport& report, const std::string& dir);
std::string render_markdown(const ExperimentReport& report);

/// Command-line entry point. Returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace distillrank
