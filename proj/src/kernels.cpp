#include "distillrank/kernels.hpp"

#include <exception>
#include <optional>

namespace distillrank::kernels {

namespace {

struct GroupResult {
  std::optional<GradientSet> grad;
  double loss = 0.0;
};

GroupResult group_gradient(const ParameterSet& params, Activation activation, const Matrix& x,
                           std::size_t group, const GroupLoss& loss) {
  ForwardResult fwd = mlp_forward(params, activation, x);
  LossAndGrad lg = loss(group, fwd.scores);
  GroupResult out;
  if (lg.grad.empty()) return out;
  out.loss = lg.loss;
  out.grad = backward(params, fwd.trace, lg.grad);
  return out;
}

void accumulate(BatchGradient& acc, GroupResult& r) {
  if (!r.grad) return;
  acc.grad.add(*r.grad);
  acc.loss_sum += r.loss;
  ++acc.active;
}

// Runs `body(i)` for i in [0, n) across threads and rethrows the first exception.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(distillrank_kernel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

BatchGradient batch_gradient_serial(const ParameterSet& params, Activation activation,
                                    std::span<const Matrix> features, std::span<const std::size_t> batch,
                                    const GroupLoss& loss) {
  BatchGradient acc{GradientSet::zeros_like(params), 0.0, 0};
  for (std::size_t g : batch) {
    GroupResult r = group_gradient(params, activation, features[g], g, loss);
    accumulate(acc, r);
  }
  return acc;
}

BatchGradient batch_gradient_parallel(const ParameterSet& params, Activation activation,
                                      std::span<const Matrix> features, std::span<const std::size_t> batch,
                                      const GroupLoss& loss) {
  std::vector<GroupResult> results(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    results[i] = group_gradient(params, activation, features[batch[i]], batch[i], loss);
  });
  BatchGradient acc{GradientSet::zeros_like(params), 0.0, 0};
  for (auto& r : results) accumulate(acc, r);
  return acc;
}

std::vector<std::vector<double>> score_groups_serial(const ParameterSet& params, Activation activation,
                                                     std::span<const Matrix> features) {
  std::vector<std::vector<double>> out;
  out.reserve(features.size());
  for (const auto& x : features) out.push_back(mlp_scores(params, activation, x));
  return out;
}

std::vector<std::vector<double>> score_groups_parallel(const ParameterSet& params, Activation activation,
                                                       std::span<const Matrix> features) {
  std::vector<std::vector<double>> out(features.size());
  parallel_for(features.size(), [&](std::size_t i) { out[i] = mlp_scores(params, activation, features[i]); });
  return out;
}

}  // namespace distillrank::kernels
