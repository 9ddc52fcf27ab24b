#include "distillrank/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "distillrank/error.hpp"

namespace distillrank {

LabelDistribution LabelDistribution::from_weights(std::span<const double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InputError("label weights must be finite and nonnegative");
    sum += w;
  }
  if (!(sum > 0.0)) throw InputError("label weights sum to zero");
  std::vector<double> p(weights.begin(), weights.end());
  for (auto& v : p) v /= sum;
  return LabelDistribution(std::move(p));
}

LabelDistribution LabelDistribution::from_probabilities(std::vector<double> probs) {
  double sum = 0.0;
  for (double v : probs) {
    if (!std::isfinite(v) || v < 0.0) throw InputError("probabilities must be finite and nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InputError("probabilities sum to " + std::to_string(sum));
  return LabelDistribution(std::move(probs));
}

LabelDistribution listwise_softmax(std::span<const double> scores, double temperature) {
  if (scores.empty()) throw InputError("softmax over an empty list");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InputError("temperature must be positive");
  double top = scores[0];
  for (double s : scores) {
    if (!std::isfinite(s)) throw InputError("non-finite score");
    top = std::max(top, s);
  }
  std::vector<double> p(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp((scores[i] - top) / temperature);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return LabelDistribution::from_probabilities(std::move(p));
}

double cross_entropy(const LabelDistribution& pred, const LabelDistribution& target) {
  if (pred.size() != target.size()) throw InputError("cross_entropy: length mismatch");
  double ce = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (target[i] == 0.0) continue;
    ce -= target[i] * std::log(std::max(pred[i], kProbabilityFloor));
  }
  return ce;
}

double weighted_ce_sum(const LabelDistribution& pred, std::span<const LabelDistribution> targets,
                       std::span<const double> weights) {
  if (targets.size() != weights.size()) throw InputError("weighted_ce_sum: targets/weights length mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (weights[k] < 0.0) throw InputError("weighted_ce_sum: negative weight");
    if (targets[k].size() != pred.size()) throw InputError("weighted_ce_sum: length mismatch");
    if (weights[k] == 0.0) continue;
    total += weights[k] * cross_entropy(pred, targets[k]);
  }
  return total;
}

LossAndGrad listwise_ce(std::span<const double> scores, const LabelDistribution& target, double temperature) {
  if (target.size() != scores.size()) throw InputError("listwise_ce: length mismatch");
  const LabelDistribution p = listwise_softmax(scores, temperature);
  LossAndGrad out;
  out.loss = cross_entropy(p, target);
  out.grad.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out.grad[i] = (p[i] - target[i]) / temperature;
  return out;
}

LossAndGrad distill_loss(std::span<const double> scores, const LabelDistribution* hard,
                         const LabelDistribution& soft, double alpha, double temperature) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  LossAndGrad out;
  out.grad.assign(scores.size(), 0.0);
  const double hard_weight = hard != nullptr ? alpha : 0.0;
  const double soft_weight = 1.0 - alpha;
  if (hard_weight != 0.0) {
    const LossAndGrad h = listwise_ce(scores, *hard, 1.0);
    out.loss += hard_weight * h.loss;
    for (std::size_t i = 0; i < scores.size(); ++i) out.grad[i] += hard_weight * h.grad[i];
  }
  if (soft_weight != 0.0) {
    const LossAndGrad s = listwise_ce(scores, soft, temperature);
    out.loss += soft_weight * s.loss;
    for (std::size_t i = 0; i < scores.size(); ++i) out.grad[i] += soft_weight * s.grad[i];
  }
  return out;
}

}  // namespace distillrank
