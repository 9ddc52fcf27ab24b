#pragma once

#include <functional>
#include <span>
#include <vector>

#include "distillrank/loss.hpp"
#include "distillrank/nn.hpp"

// Data-parallel inner loops of training and scoring. Every kernel has a serial
// reference and an OpenMP version; both reduce in group order, so their outputs
// are bit-identical for any thread count.
namespace distillrank::kernels {

/// Loss and score gradient of one group. An empty `grad` means the group
/// contributes nothing to this objective.
using GroupLoss = std::function<LossAndGrad(std::size_t group, std::span<const double> scores)>;

struct BatchGradient {
  GradientSet grad;         // summed over active groups, not averaged
  double loss_sum = 0.0;
  std::size_t active = 0;   // groups with a non-empty gradient
};

BatchGradient batch_gradient_serial(const ParameterSet& params, Activation activation,
                                    std::span<const Matrix> features, std::span<const std::size_t> batch,
                                    const GroupLoss& loss);

BatchGradient batch_gradient_parallel(const ParameterSet& params, Activation activation,
                                      std::span<const Matrix> features, std::span<const std::size_t> batch,
                                      const GroupLoss& loss);

std::vector<std::vector<double>> score_groups_serial(const ParameterSet& params, Activation activation,
                                                     std::span<const Matrix> features);

std::vector<std::vector<double>> score_groups_parallel(const ParameterSet& params, Activation activation,
                                                       std::span<const Matrix> features);

}  // namespace distillrank::kernels
