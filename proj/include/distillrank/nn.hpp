#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace distillrank {

enum class Activation { kRelu, kTanh };

const char* activation_name(Activation a);
Activation parse_activation(const std::string_view name);

/// Shape and initialization of a feed-forward ranker. `layer_dims` starts with the
/// feature dimension and ends with 1 (one score per item). Hidden layers use
/// `activation`; the output layer is linear.
struct MlpConfig {
  std::vector<std::size_t> layer_dims;
  Activation activation = Activation::kRelu;
  double init_scale = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t num_layers() const { return layer_dims.size() - 1; }
  bool operator==(const MlpConfig&) const = default;
};

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  bool operator==(const Matrix&) const = default;
};

/// One affine layer: out = in * weights + bias, weights stored in x out row-major.
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  Layer() = default;
  Layer(std::size_t i, std::size_t o) : in(i), out(o), weights(i * o, 0.0), bias(o, 0.0) {}
  bool operator==(const Layer&) const = default;
};

/// Layer-shaped tensors with flat indexing (weights of layer 0, bias of layer 0, ...).
struct LayerStack {
  std::vector<Layer> layers;

  std::size_t num_values() const;
  double& at(std::size_t flat);
  double at(std::size_t flat) const;
  bool same_shape(const LayerStack& other) const;
  bool operator==(const LayerStack&) const = default;
};

/// Trainable weights and biases of an MLP.
struct ParameterSet : LayerStack {
  static ParameterSet zeros(const MlpConfig& config);
  bool operator==(const ParameterSet&) const = default;
};

/// Loss gradients, laid out like the ParameterSet they differentiate.
struct GradientSet : LayerStack {
  static GradientSet zeros_like(const LayerStack& shape);
  void add(const GradientSet& other);
  void scale(double factor);
  bool operator==(const GradientSet&) const = default;
};

/// Cached activations of one forward pass, enough for exact backprop.
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre_activations;  // one per layer
  std::vector<Matrix> activations;      // one per layer; last is the score column
  Activation activation = Activation::kRelu;
};

struct ForwardResult {
  std::vector<double> scores;
  ForwardTrace trace;
};

/// Seeded uniform initialization in [-init_scale, init_scale], weights then bias, layer by layer.
ParameterSet initialize_parameters(const MlpConfig& config);

ForwardResult mlp_forward(const ParameterSet& params, Activation activation, const Matrix& features);

/// Scores only, without keeping the trace.
std::vector<double> mlp_scores(const ParameterSet& params, Activation activation, const Matrix& features);

/// Exact gradients of a loss whose derivative w.r.t. the scores is `score_grad`.
GradientSet backward(const ParameterSet& params, const ForwardTrace& trace,
                     std::span<const double> score_grad);

/// Central differences, one parameter at a time. Test oracle; O(#params) loss evaluations.
GradientSet finite_diff_grad(const ParameterSet& params,
                             const std::function<double(const ParameterSet&)>& loss,
                             double epsilon);

ParameterSet sgd_step(const ParameterSet& params, const GradientSet& grads, double lr);
void sgd_step_inplace(ParameterSet& params, const GradientSet& grads, double lr);

/// Largest |a - b| / max(|a|, |b|, floor) over all entries.
double max_relative_error(const LayerStack& a, const LayerStack& b, double floor = 1e-6);

}  // namespace distillrank
