#include "distillrank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "distillrank/error.hpp"

namespace distillrank {

std::vector<std::size_t> ranking_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double ndcg_at_k(std::span<const double> scores, std::span<const std::uint8_t> labels, std::size_t k) {
  if (k < 1) throw InputError("ndcg_at_k: k must be at least 1");
  if (scores.size() != labels.size()) throw InputError("ndcg_at_k: scores and labels differ in length");
  if (scores.empty()) throw InputError("ndcg_at_k: empty list");
  const std::size_t depth = std::min(k, scores.size());
  const auto order = ranking_order(scores);
  double dcg = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (labels[order[r]]) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  const std::size_t relevant = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto v) { return v != 0; }));
  if (relevant == 0) return 0.0;
  double ideal = 0.0;
  for (std::size_t r = 0; r < std::min(depth, relevant); ++r) ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / ideal;
}

double exposure_rate(std::span<const double> scores, std::span<const std::uint8_t> flags, std::size_t k) {
  if (scores.size() != flags.size()) throw InputError("exposure_rate: scores and flags differ in length");
  const std::size_t depth = std::min(k, scores.size());
  if (depth == 0) return 0.0;
  const auto order = ranking_order(scores);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < depth; ++r) hits += flags[order[r]] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(depth);
}

std::vector<double> apply_serving_boost(std::span<const double> scores, const QueryGroup& group, const BoostRule& rule,
                                        double gamma) {
  if (scores.size() != group.size()) throw InputError("serving boost: scores do not match group");
  std::vector<double> out(scores.begin(), scores.end());
  for (std::size_t p = 0; p < out.size(); ++p) {
    if (rule.matches(group.items[p])) out[p] += gamma;
  }
  return out;
}

std::vector<double> serve_with_boost(const Model& model, const QueryGroup& group, const BoostRule& rule, double gamma) {
  const auto scores = mlp_scores(model.params, model.config.activation, group.feature_matrix());
  return apply_serving_boost(scores, group, rule, gamma);
}

double kendall_tau(std::span<const std::size_t> ranking_a, std::span<const std::size_t> ranking_b) {
  const std::size_t n = ranking_a.size();
  if (ranking_b.size() != n) throw InputError("kendall_tau: rankings differ in length");
  if (n < 2) return 1.0;
  std::vector<std::size_t> pos_a(n, n), pos_b(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    if (ranking_a[r] >= n || ranking_b[r] >= n || pos_a[ranking_a[r]] != n || pos_b[ranking_b[r]] != n) {
      throw InputError("kendall_tau: inputs must be permutations of 0..n-1");
    }
    pos_a[ranking_a[r]] = r;
    pos_b[ranking_b[r]] = r;
  }
  long long concordant = 0;
  long long discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool a = pos_a[i] < pos_a[j];
      const bool b = pos_b[i] < pos_b[j];
      (a == b ? concordant : discordant) += 1;
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(concordant - discordant) / pairs;
}

double prediction_difference(std::span<const double> preds_a, std::span<const double> preds_b) {
  if (preds_a.size() != preds_b.size()) throw InputError("prediction_difference: length mismatch");
  if (preds_a.empty()) throw InputError("prediction_difference: no predictions");
  std::vector<double> terms(preds_a.size());
  for (std::size_t i = 0; i < preds_a.size(); ++i) {
    const double a = preds_a[i];
    const double b = preds_b[i];
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
      throw InputError("prediction_difference: predictions must be positive and finite");
    }
    terms[i] = std::abs(a - b) / ((a + b) / 2.0);
  }
  return compensated_sum(terms) / static_cast<double>(terms.size());
}

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

namespace {

double restricted_tau(std::span<const double> a, std::span<const double> b, std::size_t depth) {
  auto order_a = ranking_order(a);
  auto order_b = ranking_order(b);
  if (depth == 0 || depth >= a.size()) return kendall_tau(order_a, order_b);
  std::vector<std::uint8_t> keep(a.size(), 0);
  for (std::size_t r = 0; r < depth; ++r) keep[order_a[r]] = keep[order_b[r]] = 1;
  std::vector<std::size_t> remap(a.size(), 0);
  std::size_t next = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (keep[i]) remap[i] = next++;
  }
  std::vector<std::size_t> ra, rb;
  for (auto i : order_a) {
    if (keep[i]) ra.push_back(remap[i]);
  }
  for (auto i : order_b) {
    if (keep[i]) rb.push_back(remap[i]);
  }
  return kendall_tau(ra, rb);
}

}  // namespace

SxSReport sxs_compare(const std::vector<std::vector<double>>& scores_a, const std::vector<std::vector<double>>& scores_b,
                      double tau_threshold, std::size_t depth) {
  if (scores_a.empty()) throw InputError("sxs: no queries to compare");
  if (scores_a.size() != scores_b.size()) throw InputError("sxs: score sets cover different queries");
  const std::size_t q = scores_a.size();
  std::vector<double> taus(q), changed(q), pd_sums(q), item_counts(q);
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < q; ++i) {
    try {
      if (scores_a[i].size() != scores_b[i].size()) throw InputError("sxs: group sizes differ");
      taus[i] = restricted_tau(scores_a[i], scores_b[i], depth);
      changed[i] = (1.0 - taus[i]) / 2.0 > tau_threshold ? 1.0 : 0.0;
      const auto pa = listwise_softmax(scores_a[i], 1.0);
      const auto pb = listwise_softmax(scores_b[i], 1.0);
      double s = 0.0;
      for (std::size_t p = 0; p < pa.size(); ++p) {
        const double a = std::max(pa[p], kProbabilityFloor);
        const double b = std::max(pb[p], kProbabilityFloor);
        s += std::abs(a - b) / ((a + b) / 2.0);
      }
      pd_sums[i] = s;
      item_counts[i] = static_cast<double>(pa.size());
    } catch (...) {
#pragma omp critical(distillrank_sxs_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  SxSReport r;
  r.tau_threshold = tau_threshold;
  r.queries = q;
  r.change_rate = compensated_sum(changed) / static_cast<double>(q);
  r.mean_tau = compensated_sum(taus) / static_cast<double>(q);
  r.pd = compensated_sum(pd_sums) / compensated_sum(item_counts);
  return r;
}

SxSReport sxs_change_rate(const Model& model_a, const Model& model_b, const Dataset& dataset, double tau_threshold,
                          std::size_t depth) {
  if (dataset.groups.empty()) throw InputError("sxs: empty dataset");
  return sxs_compare(score_dataset(model_a, dataset), score_dataset(model_b, dataset), tau_threshold, depth);
}

RankingMetricsReport evaluate_ranking(const std::vector<std::vector<double>>& scores, const Dataset& dataset,
                                      const EvalOptions& options) {
  if (scores.size() != dataset.groups.size()) throw InputError("evaluate: one score vector per group required");
  const std::size_t q = scores.size();
  const std::size_t primary = dataset.primary_index();
  const std::size_t num_obj = options.generator ? dataset.K : 0;
  RankingMetricsReport rep;
  rep.exposure_k = options.exposure_k;
  rep.total_queries = q;
  rep.per_query.resize(q);
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < q; ++i) {
    try {
      const auto& g = dataset.groups[i];
      if (scores[i].size() != g.size()) throw InputError("evaluate: group size mismatch");
      QueryMetrics& m = rep.per_query[i];
      m.query_id = g.query_id;
      const auto labels = g.binary_labels(primary);
      m.has_relevant = std::any_of(labels.begin(), labels.end(), [](auto v) { return v != 0; });
      m.ndcg5 = ndcg_at_k(scores[i], labels, 5);
      m.ndcg10 = ndcg_at_k(scores[i], labels, 10);
      m.ndcg_full = ndcg_at_k(scores[i], labels, g.size());
      for (std::size_t k = 0; k < num_obj; ++k) {
        m.objective_exposure.push_back(exposure_rate(scores[i], favorable_flags(*options.generator, g, k), options.exposure_k));
      }
      if (options.boost_rule) {
        std::vector<std::uint8_t> flags(g.size());
        for (std::size_t p = 0; p < g.size(); ++p) flags[p] = options.boost_rule->matches(g.items[p]) ? 1 : 0;
        m.boosted_exposure = exposure_rate(scores[i], flags, options.boost_k);
      }
    } catch (...) {
#pragma omp critical(distillrank_eval_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  std::vector<double> n5, n10, nfull, boosted;
  std::vector<std::vector<double>> exposure(num_obj);
  for (const auto& m : rep.per_query) {
    if (m.has_relevant) {
      n5.push_back(m.ndcg5);
      n10.push_back(m.ndcg10);
      nfull.push_back(m.ndcg_full);
    }
    boosted.push_back(m.boosted_exposure);
    for (std::size_t k = 0; k < num_obj; ++k) exposure[k].push_back(m.objective_exposure[k]);
  }
  rep.query_count = n5.size();
  auto mean = [](const std::vector<double>& v) { return v.empty() ? 0.0 : compensated_sum(v) / static_cast<double>(v.size()); };
  rep.ndcg5 = mean(n5);
  rep.ndcg10 = mean(n10);
  rep.ndcg_full = mean(nfull);
  rep.boosted_exposure = mean(boosted);
  for (std::size_t k = 0; k < num_obj; ++k) rep.objective_exposure.push_back(mean(exposure[k]));
  return rep;
}

}  // namespace distillrank
