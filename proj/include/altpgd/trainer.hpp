#pragma once

// Deterministic full-batch gradient descent on mean cross-entropy, either on
// the clean data or on PGD-CE adversaries regenerated every epoch.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "altpgd/attack.hpp"
#include "altpgd/dataset.hpp"
#include "altpgd/errors.hpp"
#include "altpgd/models.hpp"
#include "altpgd/rng.hpp"

namespace altpgd {

/// Hidden ReLU layer widths; empty means a linear classifier.
struct ArchSpec {
  std::vector<std::size_t> hidden;
};

/// "linear" or "" for no hidden layers, otherwise comma-separated widths ("64,64").
inline ArchSpec parse_arch(std::string_view text) {
  ArchSpec arch;
  if (text.empty() || text == "linear") return arch;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const auto tok = text.substr(start, comma == std::string_view::npos ? comma : comma - start);
    std::size_t width = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), width);
    if (tok.empty() || ec != std::errc{} || p != tok.data() + tok.size() || width == 0)
      throw ConfigError("bad architecture string '" + std::string(text) + "'");
    arch.hidden.push_back(width);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return arch;
}

/// He-uniform weights, zero biases; last layer is linear.
inline Classifier init_classifier(std::size_t input_dim, std::size_t classes, const ArchSpec& arch,
                                  std::uint64_t seed) {
  if (input_dim == 0 || classes < 2) throw ConfigError("architecture does not compose");
  Rng rng(seed);
  std::vector<Layer> layers;
  std::size_t in = input_dim;
  auto make = [&](std::size_t out, Activation act) {
    Layer l;
    l.weights = Matrix(out, in);
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    for (double& w : l.weights.data) w = uniform(rng, -limit, limit);
    l.bias.assign(out, 0.0);
    l.activation = act;
    layers.push_back(std::move(l));
    in = out;
  };
  for (std::size_t width : arch.hidden) make(width, Activation::Relu);
  make(classes, Activation::Identity);
  return Classifier(std::move(layers));
}

struct AdversarialTraining {
  ThreatModel threat;
  std::size_t inner_steps = 10;
  double inner_step = 0.0;  // 0 selects 2.5 * eps / inner_steps
};

struct TrainOptions {
  std::size_t epochs = 200;
  double step = 0.5;
  std::uint64_t seed = 0;
  std::optional<AdversarialTraining> adversarial;
};

inline double accuracy(const Classifier& model, const Dataset& ds) {
  if (ds.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : ds.examples) hits += predict(model, ex.x) == ex.y;
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

/// Mean CE over the dataset and its parameter gradient at `inputs`.
inline double mean_ce_gradient(const Classifier& model, const Dataset& ds,
                               const std::vector<Vector>& inputs, ParamGradient& grad) {
  grad = zero_param_gradient(model);
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t y = ds.examples[i].y;
    const Backprop bp = backprop_objective(
        model, inputs[i],
        [&](std::span<const double> z) { return loss_value_and_logit_gradient(SurrogateKind::CE, z, y); },
        &grad);
    total += bp.loss;
  }
  const double inv = 1.0 / static_cast<double>(ds.size());
  for (auto& m : grad.weights)
    for (double& v : m.data) v *= inv;
  for (auto& b : grad.bias)
    for (double& v : b) v *= inv;
  return total * inv;
}

inline Classifier train(const Dataset& ds, const ArchSpec& arch, const TrainOptions& opt) {
  if (ds.empty()) throw ConfigError("cannot train on an empty dataset");
  ds.validate();
  if (!(opt.step > 0.0)) throw ConfigError("training step must be positive");

  AttackConfig inner;
  if (opt.adversarial) {
    const AdversarialTraining& adv = *opt.adversarial;
    if (adv.inner_steps == 0) throw ConfigError("adversarial training needs inner steps");
    inner.iterations = adv.inner_steps;
    inner.threat = adv.threat;
    inner.losses = {{SurrogateKind::CE}};
    const double eta = adv.inner_step > 0.0
                           ? adv.inner_step
                           : 2.5 * adv.threat.eps / static_cast<double>(adv.inner_steps);
    inner.steps = FixedStep{eta > 0.0 ? eta : 1e-3};
    validate_config(inner);
  }

  Classifier model = init_classifier(ds.dim, ds.classes, arch, opt.seed);
  std::vector<Vector> inputs;
  inputs.reserve(ds.size());
  for (const auto& ex : ds.examples) inputs.push_back(ex.x);

  ParamGradient grad;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    if (opt.adversarial)
      for (std::size_t i = 0; i < ds.size(); ++i)
        inputs[i] = run_pgd(model, ds.examples[i], inner).adversary;
    mean_ce_gradient(model, ds, inputs, grad);
    std::vector<Layer> layers = model.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
      auto& w = layers[li].weights.data;
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= opt.step * grad.weights[li].data[k];
      auto& b = layers[li].bias;
      for (std::size_t k = 0; k < b.size(); ++k) b[k] -= opt.step * grad.bias[li][k];
    }
    model = Classifier(std::move(layers));
  }
  return model;
}

}  // namespace altpgd
