#pragma once

// Step-size schedules for the PGD loop.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "altpgd/errors.hpp"
#include "altpgd/losses.hpp"

namespace altpgd {

struct FixedStep {
  double eta = 0.0;
};

/// eta0 * 10^-(number of drop points <= t)
struct TenfoldDrops {
  double eta0 = 0.0;
  std::vector<std::size_t> drops;
};

/// Per-stage cosine annealing. Within a stage [a, b):
///   eta(t) = eps * (1 + cos(pi * (t - a) / (b - a)))
/// so each stage restarts at 2*eps and decays toward zero. `boundaries` are
/// the interior stage starts; 0 and T close the partition.
struct CosineStages {
  std::vector<std::size_t> boundaries;
  double eps = 0.0;
};

using StepSchedule = std::variant<FixedStep, TenfoldDrops, CosineStages>;

namespace detail {

inline void check_increasing(const std::vector<std::size_t>& points, std::size_t total,
                             const char* what) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i] >= total || (i > 0 && points[i] <= points[i - 1]))
      throw ConfigError(std::string(what) + " must be strictly increasing and < T");
    if (points[i] == 0) throw ConfigError(std::string(what) + " must be positive");
  }
}

}  // namespace detail

/// Throws ConfigError if the schedule cannot produce positive steps on [0, T).
inline void validate_schedule(const StepSchedule& s, std::size_t total) {
  if (total == 0) throw ConfigError("T must be positive");
  std::visit(
      [&](const auto& v) {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, FixedStep>) {
          if (!(v.eta > 0.0)) throw ConfigError("fixed step must be positive");
        } else if constexpr (std::is_same_v<V, TenfoldDrops>) {
          if (!(v.eta0 > 0.0)) throw ConfigError("initial step must be positive");
          detail::check_increasing(v.drops, total, "drop points");
        } else {
          if (!(v.eps > 0.0)) throw ConfigError("cosine schedule eps must be positive");
          detail::check_increasing(v.boundaries, total, "stage boundaries");
        }
      },
      s);
}

inline double step_size(const StepSchedule& s, std::size_t t, std::size_t total) {
  if (t >= total) throw RangeError("iteration index out of range");
  return std::visit(
      [&](const auto& v) -> double {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, FixedStep>) {
          return v.eta;
        } else if constexpr (std::is_same_v<V, TenfoldDrops>) {
          double eta = v.eta0;
          for (std::size_t d : v.drops)
            if (d <= t) eta /= 10.0;
          return eta;
        } else {
          std::size_t a = 0;
          std::size_t b = total;
          for (std::size_t edge : v.boundaries) {
            if (edge <= t) a = edge;
            else { b = edge; break; }
          }
          const double phase = static_cast<double>(t - a) / static_cast<double>(b - a);
          return v.eps * (1.0 + std::cos(std::numbers::pi * phase));
        }
      },
      s);
}

/// Interior stage starts of a K-stage split of [0, T), identical to where
/// stage_of changes value.
inline std::vector<std::size_t> stage_boundaries(std::size_t total, std::size_t stages) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k < stages; ++k) out.push_back(stage_start(k, total, stages));
  return out;
}

/// Named configurations: "fixed-quarter" (eps/4), "gama" (2 eps, tenfold
/// drops at 0.6T and 0.85T), "md2" and "md3" (cosine with 2 or 3 stages).
inline StepSchedule make_paper_schedule(std::string_view name, double eps, std::size_t total) {
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (total == 0) throw ConfigError("T must be positive");
  StepSchedule s;
  if (name == "fixed-quarter") {
    s = FixedStep{eps / 4.0};
  } else if (name == "gama") {
    s = TenfoldDrops{2.0 * eps, {total * 60 / 100, total * 85 / 100}};
  } else if (name == "md2") {
    s = CosineStages{stage_boundaries(total, 2), eps};
  } else if (name == "md3") {
    s = CosineStages{stage_boundaries(total, 3), eps};
  } else {
    throw ConfigError("unknown schedule '" + std::string(name) + "'");
  }
  validate_schedule(s, total);
  return s;
}

inline std::string schedule_name(const StepSchedule& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, FixedStep>) return "fixed";
        else if constexpr (std::is_same_v<V, TenfoldDrops>) return "tenfold";
        else return "cosine" + std::to_string(v.boundaries.size() + 1);
      },
      s);
}

}  // namespace altpgd
