#include "distillrank/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "distillrank/error.hpp"

namespace distillrank {

const char* activation_name(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

void MlpConfig::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("layer_dims needs at least 2 entries");
  if (layer_dims.back() != 1) throw ConfigError("last layer dim must be 1");
  for (auto d : layer_dims) {
    if (d == 0) throw ConfigError("layer dims must be positive");
  }
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw ConfigError("init_scale must be positive");
}

std::size_t LayerStack::num_values() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

double& LayerStack::at(std::size_t flat) {
  for (auto& l : layers) {
    if (flat < l.weights.size()) return l.weights[flat];
    flat -= l.weights.size();
    if (flat < l.bias.size()) return l.bias[flat];
    flat -= l.bias.size();
  }
  throw InputError("flat parameter index out of range");
}

double LayerStack::at(std::size_t flat) const { return const_cast<LayerStack*>(this)->at(flat); }

bool LayerStack::same_shape(const LayerStack& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in != other.layers[i].in || layers[i].out != other.layers[i].out) return false;
  }
  return true;
}

ParameterSet ParameterSet::zeros(const MlpConfig& config) {
  config.validate();
  ParameterSet p;
  for (std::size_t l = 0; l < config.num_layers(); ++l) {
    p.layers.emplace_back(config.layer_dims[l], config.layer_dims[l + 1]);
  }
  return p;
}

GradientSet GradientSet::zeros_like(const LayerStack& shape) {
  GradientSet g;
  for (const auto& l : shape.layers) g.layers.emplace_back(l.in, l.out);
  return g;
}

void GradientSet::add(const GradientSet& other) {
  if (!same_shape(other)) throw InternalError("gradient shape mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& dst = layers[l];
    const auto& src = other.layers[l];
    for (std::size_t i = 0; i < dst.weights.size(); ++i) dst.weights[i] += src.weights[i];
    for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += src.bias[i];
  }
}

void GradientSet::scale(double factor) {
  for (auto& l : layers) {
    for (auto& w : l.weights) w *= factor;
    for (auto& b : l.bias) b *= factor;
  }
}

ParameterSet initialize_parameters(const MlpConfig& config) {
  ParameterSet p = ParameterSet::zeros(config);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> dist(-config.init_scale, config.init_scale);
  for (auto& l : p.layers) {
    for (auto& w : l.weights) w = dist(rng);
    for (auto& b : l.bias) b = dist(rng);
  }
  return p;
}

namespace {

inline double activate(Activation a, double z) {
  return a == Activation::kRelu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// d activation / dz expressed through z and the activation value.
inline double activate_grad(Activation a, double z, double value) {
  return a == Activation::kRelu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - value * value;
}

Matrix affine(const Matrix& in, const Layer& layer) {
  Matrix out(in.rows, layer.out);
  for (std::size_t r = 0; r < in.rows; ++r) {
    double* dst = &out.data[r * layer.out];
    for (std::size_t o = 0; o < layer.out; ++o) dst[o] = layer.bias[o];
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double x = in(r, i);
      const double* w = &layer.weights[i * layer.out];
      for (std::size_t o = 0; o < layer.out; ++o) dst[o] += x * w[o];
    }
  }
  return out;
}

void check_input(const ParameterSet& params, const Matrix& features) {
  if (params.layers.empty()) throw InputError("empty parameter set");
  if (features.cols != params.layers.front().in) {
    throw InputError("feature columns " + std::to_string(features.cols) + " != input dim " +
                     std::to_string(params.layers.front().in));
  }
  for (double v : features.data) {
    if (!std::isfinite(v)) throw InputError("non-finite feature value");
  }
}

}  // namespace

ForwardResult mlp_forward(const ParameterSet& params, Activation activation, const Matrix& features) {
  check_input(params, features);
  ForwardResult res;
  res.trace.input = features;
  res.trace.activation = activation;
  const Matrix* current = &res.trace.input;
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Matrix z = affine(*current, params.layers[l]);
    Matrix a = z;
    if (l != last) {
      for (auto& v : a.data) v = activate(activation, v);
    }
    res.trace.pre_activations.push_back(std::move(z));
    res.trace.activations.push_back(std::move(a));
    current = &res.trace.activations.back();
  }
  res.scores = res.trace.activations.back().data;
  return res;
}

std::vector<double> mlp_scores(const ParameterSet& params, Activation activation, const Matrix& features) {
  check_input(params, features);
  Matrix current = features;
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    current = affine(current, params.layers[l]);
    if (l != last) {
      for (auto& v : current.data) v = activate(activation, v);
    }
  }
  return std::move(current.data);
}

GradientSet backward(const ParameterSet& params, const ForwardTrace& trace,
                     std::span<const double> score_grad) {
  const std::size_t num_layers = params.layers.size();
  if (trace.activations.size() != num_layers || trace.pre_activations.size() != num_layers) {
    throw InternalError("forward trace depth does not match parameters");
  }
  const std::size_t n = trace.input.rows;
  if (score_grad.size() != n) throw InternalError("score gradient length does not match trace");
  for (std::size_t l = 0; l < num_layers; ++l) {
    if (trace.activations[l].cols != params.layers[l].out || trace.activations[l].rows != n) {
      throw InternalError("forward trace shape does not match parameters");
    }
  }

  GradientSet grads = GradientSet::zeros_like(params);
  Matrix delta(n, 1);
  std::copy(score_grad.begin(), score_grad.end(), delta.data.begin());

  for (std::size_t l = num_layers; l-- > 0;) {
    const Layer& layer = params.layers[l];
    if (l != num_layers - 1) {
      const Matrix& z = trace.pre_activations[l];
      const Matrix& a = trace.activations[l];
      for (std::size_t i = 0; i < delta.data.size(); ++i) {
        delta.data[i] *= activate_grad(trace.activation, z.data[i], a.data[i]);
      }
    }
    const Matrix& input = l == 0 ? trace.input : trace.activations[l - 1];
    Layer& g = grads.layers[l];
    for (std::size_t r = 0; r < n; ++r) {
      const double* d = &delta.data[r * layer.out];
      for (std::size_t o = 0; o < layer.out; ++o) g.bias[o] += d[o];
      for (std::size_t i = 0; i < layer.in; ++i) {
        const double x = input(r, i);
        double* gw = &g.weights[i * layer.out];
        for (std::size_t o = 0; o < layer.out; ++o) gw[o] += x * d[o];
      }
    }
    if (l == 0) break;
    Matrix prev(n, layer.in);
    for (std::size_t r = 0; r < n; ++r) {
      const double* d = &delta.data[r * layer.out];
      for (std::size_t i = 0; i < layer.in; ++i) {
        const double* w = &layer.weights[i * layer.out];
        double s = 0.0;
        for (std::size_t o = 0; o < layer.out; ++o) s += w[o] * d[o];
        prev(r, i) = s;
      }
    }
    delta = std::move(prev);
  }
  return grads;
}

GradientSet finite_diff_grad(const ParameterSet& params,
                             const std::function<double(const ParameterSet&)>& loss,
                             double epsilon) {
  GradientSet grads = GradientSet::zeros_like(params);
  ParameterSet probe = params;
  for (std::size_t i = 0; i < params.num_values(); ++i) {
    const double orig = params.at(i);
    probe.at(i) = orig + epsilon;
    const double up = loss(probe);
    probe.at(i) = orig - epsilon;
    const double down = loss(probe);
    probe.at(i) = orig;
    grads.at(i) = (up - down) / (2.0 * epsilon);
  }
  return grads;
}

void sgd_step_inplace(ParameterSet& params, const GradientSet& grads, double lr) {
  if (!params.same_shape(grads)) throw InputError("gradient shape does not match parameters");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.layers[l];
    bool finite = true;
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      p.weights[i] -= lr * g.weights[i];
      finite = finite && std::isfinite(p.weights[i]);
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
      p.bias[i] -= lr * g.bias[i];
      finite = finite && std::isfinite(p.bias[i]);
    }
    if (!finite) throw TrainingError("non-finite parameter after update in layer " + std::to_string(l));
  }
}

ParameterSet sgd_step(const ParameterSet& params, const GradientSet& grads, double lr) {
  ParameterSet next = params;
  sgd_step_inplace(next, grads, lr);
  return next;
}

double max_relative_error(const LayerStack& a, const LayerStack& b, double floor) {
  if (!a.same_shape(b)) throw InputError("shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.num_values(); ++i) {
    const double x = a.at(i);
    const double y = b.at(i);
    const double denom = std::max({std::abs(x), std::abs(y), floor});
    worst = std::max(worst, std::abs(x - y) / denom);
  }
  return worst;
}

}  // namespace distillrank
