// Fully connected feed-forward network with rectifier hidden layers, inverted
// dropout, and a task-specific output head. Parameters live in one flattened
// vector so the optimiser can treat the model as a plain point in R^m.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fairdcov/core.hpp"

namespace fairdcov {

enum class OutputHead { sigmoid, exponential };

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::size_t hidden_layers = 1;
  std::size_t hidden_width = 16;
  OutputHead head = OutputHead::sigmoid;
  double dropout = 0.0;

  void validate() const {
    if (input_dim < 1) throw ConfigError("network: input_dim must be >= 1");
    if (hidden_layers < 1) throw ConfigError("network: needs at least one hidden layer");
    if (hidden_width < 1) throw ConfigError("network: hidden width must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("network: dropout must be in [0,1)");
  }

  bool operator==(const NetworkSpec&) const = default;
};

class Network {
 public:
  Network() = default;

  explicit Network(const NetworkSpec& spec) : spec_(spec) {
    spec.validate();
    theta_.assign(param_count_of(spec), 0.0);
    build_layout();
  }

  // Symmetric uniform initialisation scaled by fan-in; biases start at zero.
  static Network initialised(const NetworkSpec& spec, std::uint64_t seed) {
    Network net(spec);
    Rng rng(seed);
    for (const auto& layer : net.layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
      for (std::size_t k = 0; k < layer.out * layer.in; ++k)
        net.theta_[layer.w_offset + k] = rng.uniform(-bound, bound);
    }
    return net;
  }

  const NetworkSpec& spec() const { return spec_; }
  std::size_t param_count() const { return theta_.size(); }
  std::vector<double>& theta() { return theta_; }
  const std::vector<double>& theta() const { return theta_; }

  // (offset, size) of each weight matrix and bias vector, in parameter order.
  // This is the granularity used for spatially averaged curvature.
  std::vector<std::pair<std::size_t, std::size_t>> tensor_blocks() const {
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    for (const auto& layer : layers_) {
      blocks.emplace_back(layer.w_offset, layer.out * layer.in);
      blocks.emplace_back(layer.b_offset, layer.out);
    }
    return blocks;
  }

  struct ForwardCache {
    std::vector<Matrix> activations;  // post-activation (and post-dropout) per hidden layer
    std::vector<Matrix> preacts;      // pre-activation per hidden layer
    std::vector<Matrix> masks;        // inverted-dropout masks; empty in eval mode
    std::vector<double> out_pre;      // output pre-activation o_i
    std::vector<double> out;          // head(o_i)
  };

  // Training-mode forward when a dropout stream is supplied, eval-mode
  // otherwise. The cache carries everything backward() needs.
  ForwardCache forward_cached(const Matrix& inputs, Rng* dropout_rng = nullptr) const {
    if (inputs.cols() != spec_.input_dim)
      throw ShapeMismatch("network forward: input dimension mismatch");
    const std::size_t n = inputs.rows();
    ForwardCache cache;
    const bool use_dropout = dropout_rng != nullptr && spec_.dropout > 0.0;
    const double keep = 1.0 - spec_.dropout;

    const Matrix* prev = &inputs;
    for (std::size_t l = 0; l < layers_.size() - 1; ++l) {
      const Layer& layer = layers_[l];
      Matrix pre(n, layer.out);
      affine(*prev, layer, pre);
      Matrix act(n, layer.out);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < layer.out; ++j) act(i, j) = std::max(pre(i, j), 0.0);
      if (use_dropout) {
        Matrix mask(n, layer.out);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < layer.out; ++j) {
            mask(i, j) = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
            act(i, j) *= mask(i, j);
          }
        cache.masks.push_back(std::move(mask));
      }
      cache.preacts.push_back(std::move(pre));
      cache.activations.push_back(std::move(act));
      prev = &cache.activations.back();
    }

    const Layer& out_layer = layers_.back();
    Matrix pre(n, 1);
    affine(*prev, out_layer, pre);
    cache.out_pre.resize(n);
    cache.out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      cache.out_pre[i] = pre(i, 0);
      cache.out[i] = apply_head(pre(i, 0));
    }
    return cache;
  }

  // Eval-mode predictions: probabilities for the sigmoid head, positive
  // per-unit-exposure rates for the exponential head.
  std::vector<double> forward(const Matrix& inputs) const {
    return forward_cached(inputs).out;
  }

  // Reverse pass; `dout` holds dJ/do_i at the output pre-activation. Returns
  // the gradient over the flattened parameters. Rectifier kinks use the zero
  // subgradient.
  std::vector<double> backward(const Matrix& inputs, const ForwardCache& cache,
                               std::span<const double> dout) const {
    const std::size_t n = inputs.rows();
    std::vector<double> grad(theta_.size(), 0.0);

    const Layer& out_layer = layers_.back();
    const Matrix& last_act = cache.activations.empty() ? inputs : cache.activations.back();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = dout[i];
      for (std::size_t j = 0; j < out_layer.in; ++j)
        grad[out_layer.w_offset + j] += d * last_act(i, j);
      grad[out_layer.b_offset] += d;
    }

    // delta for the last hidden layer
    Matrix delta(n, out_layer.in);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < out_layer.in; ++j)
        delta(i, j) = dout[i] * theta_[out_layer.w_offset + j];

    for (std::size_t l = layers_.size() - 1; l-- > 0;) {
      const Layer& layer = layers_[l];
      const Matrix& pre = cache.preacts[l];
      if (!cache.masks.empty()) {
        const Matrix& mask = cache.masks[l];
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < layer.out; ++j) delta(i, j) *= mask(i, j);
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < layer.out; ++j)
          if (pre(i, j) <= 0.0) delta(i, j) = 0.0;

      const Matrix& below = (l == 0) ? inputs : cache.activations[l - 1];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < layer.out; ++j) {
          const double d = delta(i, j);
          if (d == 0.0) continue;
          double* wrow = grad.data() + layer.w_offset + j * layer.in;
          const double* arow = below.row(i);
          for (std::size_t k = 0; k < layer.in; ++k) wrow[k] += d * arow[k];
          grad[layer.b_offset + j] += d;
        }

      if (l > 0) {
        Matrix next(n, layer.in);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < layer.in; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < layer.out; ++j)
              s += delta(i, j) * theta_[layer.w_offset + j * layer.in + k];
            next(i, k) = s;
          }
        delta = std::move(next);
      }
    }
    return grad;
  }

  double apply_head(double o) const {
    if (spec_.head == OutputHead::sigmoid) return 1.0 / (1.0 + std::exp(-o));
    return std::exp(o);
  }

  // d head / d o expressed through the head output.
  double head_derivative(double yhat) const {
    if (spec_.head == OutputHead::sigmoid) return yhat * (1.0 - yhat);
    return yhat;
  }

 private:
  struct Layer {
    std::size_t in = 0, out = 0;
    std::size_t w_offset = 0, b_offset = 0;
  };

  static std::size_t param_count_of(const NetworkSpec& spec) {
    std::size_t count = 0;
    std::size_t in = spec.input_dim;
    for (std::size_t l = 0; l < spec.hidden_layers; ++l) {
      count += spec.hidden_width * in + spec.hidden_width;
      in = spec.hidden_width;
    }
    return count + in + 1;
  }

  void build_layout() {
    layers_.clear();
    std::size_t offset = 0;
    std::size_t in = spec_.input_dim;
    for (std::size_t l = 0; l < spec_.hidden_layers; ++l) {
      Layer layer{in, spec_.hidden_width, offset, offset + spec_.hidden_width * in};
      offset = layer.b_offset + layer.out;
      layers_.push_back(layer);
      in = spec_.hidden_width;
    }
    Layer out_layer{in, 1, offset, offset + in};
    layers_.push_back(out_layer);
  }

  void affine(const Matrix& in, const Layer& layer, Matrix& pre) const {
    const std::size_t n = in.rows();
    for (std::size_t i = 0; i < n; ++i) {
      const double* arow = in.row(i);
      for (std::size_t j = 0; j < layer.out; ++j) {
        const double* wrow = theta_.data() + layer.w_offset + j * layer.in;
        double s = theta_[layer.b_offset + j];
        for (std::size_t k = 0; k < layer.in; ++k) s += wrow[k] * arow[k];
        pre(i, j) = s;
      }
    }
  }

  NetworkSpec spec_;
  std::vector<double> theta_;
  std::vector<Layer> layers_;
};

}  // namespace fairdcov
