#pragma once

#include <span>
#include <vector>

namespace distillrank {

/// Probabilities clamped to this floor before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

/// Nonnegative weights over one query's items, summing to 1.
class LabelDistribution {
 public:
  LabelDistribution() = default;

  /// Normalizes `weights` by their sum. Throws InputError on negative, non-finite
  /// or all-zero weights.
  static LabelDistribution from_weights(std::span<const double> weights);
  /// Takes `probs` as already normalized; checks the sum within 1e-9.
  static LabelDistribution from_probabilities(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& values() const { return probs_; }
  bool operator==(const LabelDistribution&) const = default;

 private:
  explicit LabelDistribution(std::vector<double> p) : probs_(std::move(p)) {}
  std::vector<double> probs_;
};

/// softmax(scores / temperature), max-subtracted.
LabelDistribution listwise_softmax(std::span<const double> scores, double temperature);

/// -sum_p target_p * log(max(pred_p, floor)).
double cross_entropy(const LabelDistribution& pred, const LabelDistribution& target);

/// sum_k weights_k * CE(pred, targets_k).
double weighted_ce_sum(const LabelDistribution& pred, std::span<const LabelDistribution> targets,
                       std::span<const double> weights);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d score, one per item
};

/// CE(softmax(scores / T), target) with gradient (p - target) / T.
LossAndGrad listwise_ce(std::span<const double> scores, const LabelDistribution& target,
                        double temperature = 1.0);

/// alpha * CE(softmax(z), hard) + (1 - alpha) * CE(softmax(z / T), soft).
/// A null `hard` drops the hard term (query without a primary label). A term whose
/// weight is exactly zero is skipped, so alpha = 1 and alpha = 0 reduce to the
/// single-term losses bit for bit.
LossAndGrad distill_loss(std::span<const double> scores, const LabelDistribution* hard,
                         const LabelDistribution& soft, double alpha, double temperature);

inline LossAndGrad distill_loss(std::span<const double> scores, const LabelDistribution& hard,
                                const LabelDistribution& soft, double alpha, double temperature) {
  return distill_loss(scores, &hard, soft, alpha, temperature);
}

}  // namespace distillrank
