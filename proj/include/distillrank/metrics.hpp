#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "distillrank/data.hpp"
#include "distillrank/distill.hpp"

namespace distillrank {

/// Item indices by descending score; equal scores keep ascending index order.
std::vector<std::size_t> ranking_order(std::span<const double> scores);

/// Binary-relevance NDCG with gain 1 / log2(rank + 1). Zero when nothing is relevant.
double ndcg_at_k(std::span<const double> scores, std::span<const std::uint8_t> labels, std::size_t k);

/// Fraction of the top min(k, n) positions held by flagged items.
double exposure_rate(std::span<const double> scores, std::span<const std::uint8_t> flags, std::size_t k);

/// Adds gamma to the scores of items matching `rule` (its beta is ignored).
std::vector<double> apply_serving_boost(std::span<const double> scores, const QueryGroup& group, const BoostRule& rule,
                                        double gamma);
std::vector<double> serve_with_boost(const Model& model, const QueryGroup& group, const BoostRule& rule, double gamma);

/// (concordant - discordant) / (n(n-1)/2) between two rankings of the same items.
double kendall_tau(std::span<const std::size_t> ranking_a, std::span<const std::size_t> ranking_b);

/// Mean relative prediction difference: 1/M sum |a - b| / ((a + b) / 2). Inputs must be positive.
double prediction_difference(std::span<const double> preds_a, std::span<const double> preds_b);

struct SxSReport {
  double change_rate = 0.0;
  double mean_tau = 1.0;
  double pd = 0.0;
  double tau_threshold = 0.02;
  std::size_t queries = 0;
};

/// Side-by-side comparison of two score sets over the same groups. A query is
/// changed when the normalized Kendall distance (1 - tau) / 2 exceeds the threshold.
/// `depth` > 0 restricts tau to the items either side ranks within the top `depth`.
/// PD compares per-item softmax probabilities.
SxSReport sxs_compare(const std::vector<std::vector<double>>& scores_a, const std::vector<std::vector<double>>& scores_b,
                      double tau_threshold = 0.02, std::size_t depth = 0);

SxSReport sxs_change_rate(const Model& model_a, const Model& model_b, const Dataset& dataset,
                          double tau_threshold = 0.02, std::size_t depth = 0);

/// Per-query metric row, also dumped to CSV.
struct QueryMetrics {
  std::uint64_t query_id = 0;
  bool has_relevant = false;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  double ndcg_full = 0.0;
  std::vector<double> objective_exposure;  // favorable items per objective at exposure_k
  double boosted_exposure = 0.0;
};

struct RankingMetricsReport {
  double ndcg5 = 0.0;  // means over queries with a relevant item
  double ndcg10 = 0.0;
  double ndcg_full = 0.0;
  std::vector<double> objective_exposure;  // means over all queries
  double boosted_exposure = 0.0;
  std::size_t exposure_k = 10;
  std::size_t query_count = 0;     // queries with a relevant item
  std::size_t total_queries = 0;
  std::vector<QueryMetrics> per_query;
};

struct EvalOptions {
  std::size_t exposure_k = 10;
  std::size_t boost_k = 5;
  /// Resolved generator config for favorable-item flags; no objective exposure without it.
  const GeneratorConfig* generator = nullptr;
  /// Items matching this rule count toward boosted_exposure.
  std::optional<BoostRule> boost_rule;
};

/// Parallel over queries; means use compensated summation in query order.
RankingMetricsReport evaluate_ranking(const std::vector<std::vector<double>>& scores, const Dataset& dataset,
                                      const EvalOptions& options);

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);

}  // namespace distillrank
