#pragma once

// Surrogate objectives over logits: cross-entropy, the Carlini-Wagner margin,
// and the difference-of-logits ratio, together with their exact gradients,
// the K-stage schedule selector and the convex two-loss combiner.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "altpgd/errors.hpp"

namespace altpgd {

using Vector = std::vector<double>;

enum class SurrogateKind { CE, CW, DLR };

inline std::string_view to_string(SurrogateKind k) {
  switch (k) {
    case SurrogateKind::CE: return "CE";
    case SurrogateKind::CW: return "CW";
    case SurrogateKind::DLR: return "DLR";
  }
  return "?";
}

/// Parses "ce", "cw", "dlr" (case-insensitive).
inline std::optional<SurrogateKind> parse_surrogate(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ce") return SurrogateKind::CE;
  if (lower == "cw") return SurrogateKind::CW;
  if (lower == "dlr") return SurrogateKind::DLR;
  return std::nullopt;
}

/// Ordered surrogates; stage k of a T-iteration run uses stages[k].
struct LossSchedule {
  std::vector<SurrogateKind> stages;

  std::size_t size() const { return stages.size(); }
};

/// "CE&CW&DLR"-style label used in reports.
inline std::string schedule_label(const LossSchedule& s) {
  std::string out;
  for (std::size_t i = 0; i < s.stages.size(); ++i) {
    if (i) out += '&';
    out += to_string(s.stages[i]);
  }
  return out;
}

/// gamma * first + (1 - gamma) * second.
struct ConvexCombo {
  double gamma = 0.5;
  SurrogateKind first = SurrogateKind::CE;
  SurrogateKind second = SurrogateKind::CW;
};

struct LossAndGradient {
  double value = 0.0;
  Vector gradient;
};

inline constexpr double kDlrDenominatorGuard = 1e-12;

namespace detail {

inline void check_class(std::span<const double> z, std::size_t y) {
  if (z.size() < 2) throw ShapeError("logits need at least 2 classes");
  if (y >= z.size()) {
    throw RangeError("class index " + std::to_string(y) + " out of range for " +
                     std::to_string(z.size()) + " classes");
  }
}

inline std::size_t argmax(std::span<const double> z) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < z.size(); ++j)
    if (z[j] > z[best]) best = j;
  return best;
}

// argmax over j != y, lowest index on ties.
inline std::size_t best_other(std::span<const double> z, std::size_t y) {
  std::size_t best = (y == 0) ? 1 : 0;
  for (std::size_t j = best + 1; j < z.size(); ++j)
    if (j != y && z[j] > z[best]) best = j;
  return best;
}

// Indices of the first and third largest logits under a stable descending sort.
inline std::pair<std::size_t, std::size_t> top1_top3(std::span<const double> z) {
  std::vector<std::size_t> order(z.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
  return {order[0], order[2]};
}

}  // namespace detail

/// -z_y + logsumexp(z), evaluated as (max - z_y) + log1p(sum_{j != argmax} e^{z_j - max}).
inline double ce_loss(std::span<const double> z, std::size_t y) {
  detail::check_class(z, y);
  const std::size_t top = detail::argmax(z);
  const double m = z[top];
  double rest = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j)
    if (j != top) rest += std::exp(z[j] - m);
  return (m - z[y]) + std::log1p(rest);
}

/// max_{j != y} z_j - z_y. Positive iff some other class strictly beats y.
inline double cw_loss(std::span<const double> z, std::size_t y) {
  detail::check_class(z, y);
  return z[detail::best_other(z, y)] - z[y];
}

/// -(z_y - max_{j != y} z_j) / (z_pi1 - z_pi3).
inline double dlr_loss(std::span<const double> z, std::size_t y) {
  detail::check_class(z, y);
  if (z.size() < 3) throw ShapeError("DLR needs at least 3 classes");
  const auto [p1, p3] = detail::top1_top3(z);
  const double den = z[p1] - z[p3];
  if (std::abs(den) <= kDlrDenominatorGuard)
    throw DegenerateLossError("DLR denominator z_pi1 - z_pi3 is degenerate");
  return -(z[y] - z[detail::best_other(z, y)]) / den;
}

inline double loss_value(SurrogateKind kind, std::span<const double> z, std::size_t y) {
  switch (kind) {
    case SurrogateKind::CE: return ce_loss(z, y);
    case SurrogateKind::CW: return cw_loss(z, y);
    case SurrogateKind::DLR: return dlr_loss(z, y);
  }
  throw ConfigError("unknown surrogate");
}

/// Loss value and its gradient with respect to the logits.
///   CE:  softmax(z) - e_y
///   CW:  e_{j*} - e_y
///   DLR: -(e_y - e_{j*}) / d + n (e_pi1 - e_pi3) / d^2, with n = z_y - z_{j*}, d = z_pi1 - z_pi3
inline LossAndGradient loss_value_and_logit_gradient(SurrogateKind kind,
                                                     std::span<const double> z,
                                                     std::size_t y) {
  LossAndGradient out;
  out.gradient.assign(z.size(), 0.0);
  switch (kind) {
    case SurrogateKind::CE: {
      out.value = ce_loss(z, y);
      const double m = z[detail::argmax(z)];
      double sum = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) {
        out.gradient[j] = std::exp(z[j] - m);
        sum += out.gradient[j];
      }
      for (double& g : out.gradient) g /= sum;
      out.gradient[y] -= 1.0;
      break;
    }
    case SurrogateKind::CW: {
      out.value = cw_loss(z, y);
      out.gradient[detail::best_other(z, y)] += 1.0;
      out.gradient[y] -= 1.0;
      break;
    }
    case SurrogateKind::DLR: {
      out.value = dlr_loss(z, y);
      const std::size_t other = detail::best_other(z, y);
      const auto [p1, p3] = detail::top1_top3(z);
      const double num = z[y] - z[other];
      const double den = z[p1] - z[p3];
      out.gradient[y] -= 1.0 / den;
      out.gradient[other] += 1.0 / den;
      const double scale = num / (den * den);
      out.gradient[p1] += scale;
      out.gradient[p3] -= scale;
      break;
    }
  }
  return out;
}

inline void check_combo(const ConvexCombo& combo) {
  if (!(combo.gamma >= 0.0 && combo.gamma <= 1.0))
    throw ConfigError("convex weight gamma must lie in [0, 1]");
}

inline LossAndGradient convex_loss_and_gradient(const ConvexCombo& combo,
                                                std::span<const double> z, std::size_t y) {
  check_combo(combo);
  const LossAndGradient a = loss_value_and_logit_gradient(combo.first, z, y);
  const LossAndGradient b = loss_value_and_logit_gradient(combo.second, z, y);
  LossAndGradient out;
  out.value = combo.gamma * a.value + (1.0 - combo.gamma) * b.value;
  out.gradient.resize(z.size());
  for (std::size_t j = 0; j < z.size(); ++j)
    out.gradient[j] = combo.gamma * a.gradient[j] + (1.0 - combo.gamma) * b.gradient[j];
  return out;
}

/// Stage index min(floor(t K / T), K - 1). Stage k covers ceil(kT/K) <= t < ceil((k+1)T/K).
inline std::size_t stage_of(std::size_t t, std::size_t total, std::size_t stages) {
  if (stages == 0 || stages > total)
    throw ConfigError("stage count must satisfy 1 <= K <= T");
  if (t >= total) throw RangeError("iteration index out of range");
  return std::min(t * stages / total, stages - 1);
}

/// First iteration of stage k, i.e. ceil(kT/K). stage_start(K) == T.
inline std::size_t stage_start(std::size_t k, std::size_t total, std::size_t stages) {
  if (stages == 0 || stages > total)
    throw ConfigError("stage count must satisfy 1 <= K <= T");
  return (k * total + stages - 1) / stages;
}

}  // namespace altpgd
