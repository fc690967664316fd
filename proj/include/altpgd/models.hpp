#pragma once

// Dense classifiers (linear or ReLU MLP) with a forward pass to logits and
// analytic backpropagation to the input and to the parameters.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "altpgd/errors.hpp"
#include "altpgd/losses.hpp"

namespace altpgd {

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw ShapeError("matrix data size does not match rows*cols");
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

enum class Activation : std::uint8_t { Identity = 0, Relu = 1 };

/// out = act(weights * in + bias)
struct Layer {
  Matrix weights;
  Vector bias;
  Activation activation = Activation::Identity;

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Immutable after construction; every member function is const and safe to
/// call concurrently on a shared instance.
class Classifier {
 public:
  Classifier() = default;

  explicit Classifier(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

  /// Linear map z = W x + b (b defaults to zero).
  static Classifier linear(Matrix w, Vector b = {}) {
    if (b.empty()) b.assign(w.rows, 0.0);
    return Classifier({Layer{std::move(w), std::move(b), Activation::Identity}});
  }

  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t num_classes() const { return layers_.back().out_dim(); }
  const std::vector<Layer>& layers() const { return layers_; }

  friend bool operator==(const Classifier&, const Classifier&) = default;

 private:
  void validate() const {
    if (layers_.empty()) throw ShapeError("classifier needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const Layer& l = layers_[i];
      if (l.weights.rows == 0 || l.weights.cols == 0) throw ShapeError("empty layer");
      if (l.weights.data.size() != l.weights.rows * l.weights.cols)
        throw ShapeError("layer weight storage does not match its shape");
      if (l.bias.size() != l.weights.rows)
        throw ShapeError("layer " + std::to_string(i) + ": bias length != rows");
      if (i > 0 && layers_[i - 1].out_dim() != l.in_dim())
        throw ShapeError("layer " + std::to_string(i) + " does not compose with its predecessor");
    }
    if (num_classes() < 2) throw ShapeError("classifier needs at least 2 classes");
  }

  std::vector<Layer> layers_;
};

namespace detail {

inline void check_input(const Classifier& model, std::span<const double> x) {
  if (x.size() != model.input_dim())
    throw ShapeError("input has length " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(model.input_dim()));
}

inline Vector affine(const Layer& l, std::span<const double> in) {
  Vector out(l.out_dim());
  for (std::size_t i = 0; i < l.out_dim(); ++i) {
    double acc = l.bias[i];
    const auto w = l.weights.row(i);
    for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * in[j];
    out[i] = acc;
  }
  return out;
}

// Layer inputs and pre-activations retained for the backward pass.
struct Tape {
  std::vector<Vector> inputs;
  std::vector<Vector> pre;
  Vector logits;
};

inline Tape record_forward(const Classifier& model, std::span<const double> x) {
  check_input(model, x);
  Tape tape;
  Vector cur(x.begin(), x.end());
  for (const Layer& l : model.layers()) {
    Vector a = affine(l, cur);
    tape.inputs.push_back(std::move(cur));
    cur = a;
    if (l.activation == Activation::Relu)
      for (double& v : cur) v = v > 0.0 ? v : 0.0;
    tape.pre.push_back(std::move(a));
  }
  tape.logits = std::move(cur);
  return tape;
}

}  // namespace detail

inline Vector forward(const Classifier& model, std::span<const double> x) {
  detail::check_input(model, x);
  Vector cur(x.begin(), x.end());
  for (const Layer& l : model.layers()) {
    cur = detail::affine(l, cur);
    if (l.activation == Activation::Relu)
      for (double& v : cur) v = v > 0.0 ? v : 0.0;
  }
  return cur;
}

/// argmax of the logits; the lowest index wins ties.
inline std::size_t predict(const Classifier& model, std::span<const double> x) {
  return detail::argmax(forward(model, x));
}

/// Per-layer parameter gradients, same shapes as the model's layers.
struct ParamGradient {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
};

struct Backprop {
  double loss = 0.0;
  Vector logits;
  Vector input_grad;
};

/// Pulls a logit-space gradient back through the network. If `params` is
/// non-null the parameter gradients are accumulated into it.
inline Vector backpropagate(const Classifier& model, const detail::Tape& tape,
                            std::span<const double> logit_grad, ParamGradient* params = nullptr) {
  const auto& layers = model.layers();
  Vector delta(logit_grad.begin(), logit_grad.end());
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer& l = layers[li];
    if (l.activation == Activation::Relu) {
      // subgradient 0 at the kink
      for (std::size_t i = 0; i < delta.size(); ++i)
        if (!(tape.pre[li][i] > 0.0)) delta[i] = 0.0;
    }
    const Vector& in = tape.inputs[li];
    if (params) {
      Matrix& gw = params->weights[li];
      Vector& gb = params->bias[li];
      for (std::size_t i = 0; i < l.out_dim(); ++i) {
        gb[i] += delta[i];
        for (std::size_t j = 0; j < l.in_dim(); ++j) gw(i, j) += delta[i] * in[j];
      }
    }
    Vector prev(l.in_dim(), 0.0);
    for (std::size_t i = 0; i < l.out_dim(); ++i) {
      const double d = delta[i];
      if (d == 0.0) continue;
      const auto w = l.weights.row(i);
      for (std::size_t j = 0; j < w.size(); ++j) prev[j] += w[j] * d;
    }
    delta = std::move(prev);
  }
  return delta;
}

inline ParamGradient zero_param_gradient(const Classifier& model) {
  ParamGradient g;
  for (const Layer& l : model.layers()) {
    g.weights.emplace_back(l.weights.rows, l.weights.cols, 0.0);
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

/// Loss and gradient of an arbitrary logit-space objective with respect to x.
template <typename LogitObjective>
Backprop backprop_objective(const Classifier& model, std::span<const double> x,
                            LogitObjective&& objective, ParamGradient* params = nullptr) {
  detail::Tape tape = detail::record_forward(model, x);
  LossAndGradient lg = objective(std::span<const double>(tape.logits));
  Backprop out;
  out.loss = lg.value;
  out.input_grad = backpropagate(model, tape, lg.gradient, params);
  out.logits = std::move(tape.logits);
  return out;
}

inline Backprop loss_and_input_gradient(const Classifier& model, std::span<const double> x,
                                        std::size_t y, SurrogateKind kind) {
  return backprop_objective(model, x, [&](std::span<const double> z) {
    return loss_value_and_logit_gradient(kind, z, y);
  });
}

/// Gradient of L(z(x), y) with respect to x.
inline Vector input_gradient(const Classifier& model, std::span<const double> x, std::size_t y,
                             SurrogateKind kind) {
  return loss_and_input_gradient(model, x, y, kind).input_grad;
}

}  // namespace altpgd
