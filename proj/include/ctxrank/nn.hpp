#pragma once

// Minimal dense network substrate: fully connected layers with SELU hidden
// activations, batched forward/backward over column-major sample matrices,
// and Nesterov-momentum SGD with L1/L2 penalties.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ctxrank::nn {

enum class Activation { selu, linear };

inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

template <typename Scalar>
Scalar selu(Scalar x) {
  return x > Scalar(0) ? Scalar(kSeluLambda) * x
                       : Scalar(kSeluLambda * kSeluAlpha) * std::expm1(x);
}

// d selu / dx, evaluated at the pre-activation.
template <typename Scalar>
Scalar selu_derivative(Scalar x) {
  return x > Scalar(0) ? Scalar(kSeluLambda) : Scalar(kSeluLambda * kSeluAlpha) * std::exp(x);
}

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar = double>
struct Layer {
  Matrix<Scalar> weights;  // fan_out x fan_in
  Vector<Scalar> bias;
  Activation activation = Activation::selu;
};

template <typename Scalar = double>
struct DenseNet {
  std::vector<Layer<Scalar>> layers;

  Eigen::Index input_width() const { return layers.empty() ? 0 : layers.front().weights.cols(); }
  Eigen::Index output_width() const { return layers.empty() ? 0 : layers.back().weights.rows(); }

  std::vector<int> layer_sizes() const {
    std::vector<int> sizes;
    if (layers.empty()) return sizes;
    sizes.push_back(static_cast<int>(input_width()));
    for (const auto& l : layers) sizes.push_back(static_cast<int>(l.weights.rows()));
    return sizes;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index count = 0;
    for (const auto& l : layers) count += l.weights.size() + l.bias.size();
    return count;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  friend bool operator==(const DenseNet& a, const DenseNet& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
      const auto& la = a.layers[k];
      const auto& lb = b.layers[k];
      if (la.activation != lb.activation || la.weights.rows() != lb.weights.rows() ||
          la.weights.cols() != lb.weights.cols() || la.weights != lb.weights || la.bias != lb.bias)
        return false;
    }
    return true;
  }
};

template <typename Scalar = double>
struct LayerGrad {
  Matrix<Scalar> weights;
  Vector<Scalar> bias;
};

template <typename Scalar = double>
using ParamGrads = std::vector<LayerGrad<Scalar>>;

// Intermediates of one forward pass; moved into the matching backward call.
template <typename Scalar = double>
struct GradientTape {
  std::vector<Matrix<Scalar>> inputs;
  std::vector<Matrix<Scalar>> pre_activations;
};

template <typename Scalar = double>
struct ForwardResult {
  Matrix<Scalar> output;
  GradientTape<Scalar> tape;
};

template <typename Scalar = double>
struct BackwardResult {
  ParamGrads<Scalar> grads;
  Matrix<Scalar> input_grad;  // d(sum(output .* dy)) / d input
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 10;
  int batch_size = 32;
  double l1 = 0.0;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  // Cosine decay from learning_rate (first epoch) towards
  // learning_rate * final_lr_ratio (last epoch); 1 keeps the rate constant.
  double final_lr_ratio = 1.0;

  double epoch_learning_rate(int epoch) const {
    if (final_lr_ratio == 1.0 || epochs <= 1) return learning_rate;
    const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
    const double pi = 3.14159265358979323846;
    return learning_rate * (final_lr_ratio + (1.0 - final_lr_ratio) * 0.5 * (1.0 + std::cos(pi * t)));
  }

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0,1)");
    if (epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    if (!(l1 >= 0.0) || !(l2 >= 0.0)) throw std::invalid_argument("l1/l2 penalties must be nonnegative");
    if (!(final_lr_ratio > 0.0 && final_lr_ratio <= 1.0))
      throw std::invalid_argument("final_lr_ratio must lie in (0,1]");
  }
};

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what, int epoch = -1)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Weights ~ N(0, 1/fan_in), zero biases, SELU on hidden layers and a linear
// output layer.
template <typename Scalar = double>
DenseNet<Scalar> net_init(std::span<const int> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("net_init: need at least two layer sizes");
  for (int s : layer_sizes)
    if (s <= 0) throw std::invalid_argument("net_init: layer sizes must be positive");

  std::mt19937_64 rng(seed);
  DenseNet<Scalar> net;
  for (std::size_t k = 1; k < layer_sizes.size(); ++k) {
    const int fan_in = layer_sizes[k - 1];
    const int fan_out = layer_sizes[k];
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    Layer<Scalar> layer;
    layer.weights.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) layer.weights(r, c) = Scalar(normal(rng));
    layer.bias = Vector<Scalar>::Zero(fan_out);
    layer.activation = k + 1 == layer_sizes.size() ? Activation::linear : Activation::selu;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

template <typename Scalar>
DenseNet<Scalar> net_init(std::initializer_list<int> layer_sizes, std::uint64_t seed) {
  return net_init<Scalar>(std::span<const int>(layer_sizes.begin(), layer_sizes.size()), seed);
}

inline DenseNet<double> net_init(std::initializer_list<int> layer_sizes, std::uint64_t seed) {
  return net_init<double>(std::span<const int>(layer_sizes.begin(), layer_sizes.size()), seed);
}

namespace detail {

template <typename Derived>
void apply_activation(Activation act, Eigen::MatrixBase<Derived>& z) {
  if (act == Activation::linear) return;
  using Scalar = typename Derived::Scalar;
  z = z.unaryExpr([](Scalar v) { return selu(v); });
}

template <typename Scalar>
void check_input(const DenseNet<Scalar>& net, Eigen::Index rows) {
  if (net.layers.empty()) throw std::invalid_argument("network has no layers");
  if (rows != net.input_width())
    throw std::invalid_argument("input width " + std::to_string(rows) + " does not match network input " +
                                std::to_string(net.input_width()));
}

}  // namespace detail

// Evaluates the network on every column of `x` (samples as columns).
template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const DenseNet<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  detail::check_input(net, x.rows());
  ForwardResult<Scalar> result;
  result.tape.inputs.reserve(net.layers.size());
  result.tape.pre_activations.reserve(net.layers.size());
  Matrix<Scalar> a = x;
  for (const auto& layer : net.layers) {
    Matrix<Scalar> z = layer.weights * a;
    z.colwise() += layer.bias;
    result.tape.inputs.push_back(std::move(a));
    a = z;
    detail::apply_activation(layer.activation, a);
    result.tape.pre_activations.push_back(std::move(z));
  }
  result.output = std::move(a);
  return result;
}

// Forward pass without recording intermediates.
template <typename Scalar, typename Derived>
Matrix<Scalar> evaluate(const DenseNet<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  detail::check_input(net, x.rows());
  Matrix<Scalar> a = x;
  for (const auto& layer : net.layers) {
    Matrix<Scalar> z = layer.weights * a;
    z.colwise() += layer.bias;
    detail::apply_activation(layer.activation, z);
    a = std::move(z);
  }
  return a;
}

// Gradients of sum(output .* dy) w.r.t. every parameter, summed over the
// batch columns, plus the gradient w.r.t. the input matrix.
template <typename Scalar, typename Derived>
BackwardResult<Scalar> backward(const DenseNet<Scalar>& net, GradientTape<Scalar>&& tape,
                                const Eigen::MatrixBase<Derived>& dy) {
  const std::size_t depth = net.layers.size();
  if (tape.inputs.size() != depth || tape.pre_activations.size() != depth)
    throw std::invalid_argument("backward: tape does not match network depth");
  if (dy.rows() != net.output_width() || dy.cols() != tape.pre_activations.back().cols())
    throw std::invalid_argument("backward: output gradient shape mismatch");

  BackwardResult<Scalar> result;
  result.grads.resize(depth);
  Matrix<Scalar> delta = dy;
  for (std::size_t k = depth; k-- > 0;) {
    const auto& layer = net.layers[k];
    const auto& z = tape.pre_activations[k];
    if (z.rows() != layer.weights.rows() || tape.inputs[k].rows() != layer.weights.cols())
      throw std::invalid_argument("backward: tape/net shape mismatch");
    if (layer.activation == Activation::selu)
      delta.array() *= z.unaryExpr([](Scalar v) { return selu_derivative(v); }).array();
    result.grads[k].weights.noalias() = delta * tape.inputs[k].transpose();
    result.grads[k].bias = delta.rowwise().sum();
    Matrix<Scalar> next = layer.weights.transpose() * delta;
    delta = std::move(next);
  }
  result.input_grad = std::move(delta);
  tape = {};
  return result;
}

template <typename Scalar>
ParamGrads<Scalar> zeros_like(const DenseNet<Scalar>& net) {
  ParamGrads<Scalar> g(net.layers.size());
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    g[k].weights = Matrix<Scalar>::Zero(net.layers[k].weights.rows(), net.layers[k].weights.cols());
    g[k].bias = Vector<Scalar>::Zero(net.layers[k].bias.size());
  }
  return g;
}

template <typename Scalar>
void accumulate(ParamGrads<Scalar>& into, const ParamGrads<Scalar>& g, Scalar scale = Scalar(1)) {
  if (into.size() != g.size()) throw std::invalid_argument("accumulate: gradient depth mismatch");
  for (std::size_t k = 0; k < g.size(); ++k) {
    into[k].weights += scale * g[k].weights;
    into[k].bias += scale * g[k].bias;
  }
}

template <typename Scalar>
bool all_finite(const ParamGrads<Scalar>& g) {
  for (const auto& l : g)
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

// One Nesterov update in look-ahead form. The L1/L2 penalty gradient
// (2*l2*theta + l1*sign(theta)) is added to `grads` before the update.
// Non-finite gradients throw DivergenceError and leave net/velocity untouched.
template <typename Scalar>
void nesterov_step(DenseNet<Scalar>& net, const ParamGrads<Scalar>& grads, ParamGrads<Scalar>& velocity,
                   const TrainConfig& cfg) {
  if (grads.size() != net.layers.size() || velocity.size() != net.layers.size())
    throw std::invalid_argument("nesterov_step: shape mismatch");
  if (!all_finite(grads)) throw DivergenceError("non-finite gradient");

  const Scalar lr(cfg.learning_rate);
  const Scalar mu(cfg.momentum);
  const Scalar l1(cfg.l1);
  const Scalar l2(cfg.l2);
  auto sign = [](Scalar v) { return Scalar((v > Scalar(0)) - (v < Scalar(0))); };

  auto update = [&](auto& theta, const auto& g_raw, auto& v) {
    auto g = (g_raw.array() + Scalar(2) * l2 * theta.array() + l1 * theta.array().unaryExpr(sign)).eval();
    v.array() = mu * v.array() - lr * g;
    theta.array() += mu * v.array() - lr * g;
  };

  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& layer = net.layers[k];
    if (grads[k].weights.rows() != layer.weights.rows() || grads[k].weights.cols() != layer.weights.cols() ||
        velocity[k].weights.rows() != layer.weights.rows() || velocity[k].weights.cols() != layer.weights.cols())
      throw std::invalid_argument("nesterov_step: shape mismatch");
    update(layer.weights, grads[k].weights, velocity[k].weights);
    update(layer.bias, grads[k].bias, velocity[k].bias);
  }
}

// Row-major weights, then bias, layer by layer.
template <typename Scalar>
void flatten_into(const DenseNet<Scalar>& net, std::vector<Scalar>& out) {
  for (const auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) out.push_back(l.weights(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
}

// Inverse of flatten_into for a net whose shapes are already set; returns
// the number of values consumed.
template <typename Scalar>
std::size_t unflatten_from(DenseNet<Scalar>& net, std::span<const Scalar> values) {
  std::size_t pos = 0;
  auto next = [&]() {
    if (pos >= values.size()) throw std::invalid_argument("parameter list too short");
    return values[pos++];
  };
  for (auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = next();
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = next();
  }
  return pos;
}

// Zero-initialized network with the given shape (used when loading).
template <typename Scalar = double>
DenseNet<Scalar> net_shape(std::span<const int> layer_sizes) {
  DenseNet<Scalar> net;
  for (std::size_t k = 1; k < layer_sizes.size(); ++k) {
    Layer<Scalar> layer;
    layer.weights = Matrix<Scalar>::Zero(layer_sizes[k], layer_sizes[k - 1]);
    layer.bias = Vector<Scalar>::Zero(layer_sizes[k]);
    layer.activation = k + 1 == layer_sizes.size() ? Activation::linear : Activation::selu;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace ctxrank::nn
