#include "distillrank/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "distillrank/error.hpp"

namespace distillrank {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale must be positive");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
  }
}

MlpConfig TrainConfig::mlp_for(std::size_t input_dim) const {
  MlpConfig c;
  c.layer_dims.push_back(input_dim);
  c.layer_dims.insert(c.layer_dims.end(), hidden.begin(), hidden.end());
  c.layer_dims.push_back(1);
  c.activation = activation;
  c.init_scale = init_scale;
  c.seed = seed;
  c.validate();
  return c;
}

ParameterSet train_loop(const MlpConfig& mlp, std::span<const Matrix> features, const kernels::GroupLoss& loss,
                        const TrainConfig& config, TrainingLog* log,
                        const BatchObserver& observer) {
  config.validate();
  ParameterSet params = initialize_parameters(mlp);
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(mlp.seed ^ 0x9e3779b97f4a7c15ULL);
  double lr = config.learning_rate;
  if (log) log->training_groups = features.size();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_sum = 0.0;
    std::size_t epoch_active = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      if (observer) observer(batch);
      kernels::BatchGradient bg = kernels::batch_gradient_parallel(params, mlp.activation, features, batch, loss);
      epoch_sum += bg.loss_sum;
      epoch_active += bg.active;
      if (log) {
        log->batch_loss.push_back(bg.loss_sum / static_cast<double>(len));
        ++log->steps;
      }
      if (bg.active == 0) continue;
      bg.grad.scale(1.0 / static_cast<double>(len));
      sgd_step_inplace(params, bg.grad, lr);
    }
    if (log) log->epoch_loss.push_back(epoch_active ? epoch_sum / static_cast<double>(epoch_active) : 0.0);
    lr *= config.lr_decay;
  }
  return params;
}

}  // namespace distillrank
