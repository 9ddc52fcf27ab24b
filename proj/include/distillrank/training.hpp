#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "distillrank/kernels.hpp"
#include "distillrank/nn.hpp"

namespace distillrank {

/// Optimizer and network settings shared by every trainer.
struct TrainConfig {
  std::size_t epochs = 24;
  double learning_rate = 0.5;
  double lr_decay = 0.9;  // multiplicative, applied after each epoch
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
  std::vector<std::size_t> hidden = {32, 16};
  Activation activation = Activation::kRelu;
  double init_scale = 0.2;

  void validate() const;
  MlpConfig mlp_for(std::size_t input_dim) const;
  bool operator==(const TrainConfig&) const = default;
};

/// Bookkeeping of one training run.
struct TrainingLog {
  std::size_t training_groups = 0;
  std::size_t steps = 0;
  std::vector<double> epoch_loss;  // mean loss over active groups
  std::vector<double> batch_loss;  // mean loss over the groups of each batch
  /// Filled by multi-objective trainers: groups and batches each objective touched.
  std::vector<std::size_t> objective_groups;
  std::vector<std::size_t> objective_batches;
};

/// Called with the group indices of each batch before its step.
using BatchObserver = std::function<void(std::span<const std::size_t>)>;

/// Minibatch SGD over query groups. Groups are reshuffled every epoch from the
/// run seed; each step averages the summed group gradients over the batch size.
ParameterSet train_loop(const MlpConfig& mlp, std::span<const Matrix> features, const kernels::GroupLoss& loss,
                        const TrainConfig& config, TrainingLog* log = nullptr,
                        const BatchObserver& observer = {});

}  // namespace distillrank
