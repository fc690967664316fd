#pragma once

// Projected gradient ascent on surrogate losses inside an lp ball around the
// clean input, with K-stage loss alternation, convex loss mixing, restarts,
// best-iterate tracking and the ensemble-OR combiner.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "altpgd/errors.hpp"
#include "altpgd/losses.hpp"
#include "altpgd/models.hpp"
#include "altpgd/dataset.hpp"
#include "altpgd/rng.hpp"
#include "altpgd/schedules.hpp"

namespace altpgd {

enum class Norm { Inf, Two };

inline std::string_view to_string(Norm p) { return p == Norm::Inf ? "inf" : "2"; }

/// S(x) = { x' : ||x' - x||_p <= eps } (intersected with [0,1]^D when box is set).
struct ThreatModel {
  Norm p = Norm::Inf;
  double eps = 8.0 / 255.0;
  bool box = true;
};

inline void validate_threat(const ThreatModel& threat) {
  if (!(threat.eps >= 0.0) || !std::isfinite(threat.eps))
    throw ConfigError("eps must be finite and non-negative");
}

struct CleanInit {};

/// x0 + eps * sign(u), u ~ U(-1, 1) per coordinate, then projected.
struct RandomSignInit {
  std::uint64_t seed = 0;
};

using InitStrategy = std::variant<CleanInit, RandomSignInit>;

enum class CombinerKind { Alternate, Convex, EnsembleOr };

struct Combiner {
  CombinerKind kind = CombinerKind::Alternate;
  double gamma = 0.5;  // Convex only: weight of losses.stages[0]
};

struct AttackConfig {
  std::size_t iterations = 100;
  std::size_t restarts = 1;
  ThreatModel threat;
  LossSchedule losses{{SurrogateKind::CE}};
  StepSchedule steps = FixedStep{2.0 / 255.0};
  InitStrategy init = CleanInit{};
  Combiner combiner;
};

inline void validate_config(const AttackConfig& c) {
  if (c.iterations == 0) throw ConfigError("T must be at least 1");
  if (c.restarts == 0) throw ConfigError("R must be at least 1");
  if (c.restarts > 1 && std::holds_alternative<CleanInit>(c.init))
    throw ConfigError("R > 1 requires random-sign initialization; clean restarts are identical");
  validate_threat(c.threat);
  if (c.losses.stages.empty()) throw ConfigError("loss schedule is empty");
  if (c.losses.size() > c.iterations) throw ConfigError("more loss stages than iterations");
  switch (c.combiner.kind) {
    case CombinerKind::Alternate: break;
    case CombinerKind::Convex:
      if (c.losses.size() != 2) throw ConfigError("convex combiner needs exactly two losses");
      check_combo({c.combiner.gamma, c.losses.stages[0], c.losses.stages[1]});
      break;
    case CombinerKind::EnsembleOr:
      if (c.losses.size() < 2) throw ConfigError("ensemble-OR needs at least two losses");
      break;
  }
  validate_schedule(c.steps, c.iterations);
}

/// One PGD step (or a restart's starting point when t == 0).
struct IterateRecord {
  std::size_t run = 0;      // ensemble constituent; 0 otherwise
  std::size_t restart = 0;
  std::size_t t = 0;        // iterate index: x^(t), t >= 1 for steps
  std::size_t stage = 0;
  double step = 0.0;
  SurrogateKind loss = SurrogateKind::CE;
  bool convex = false;
  double loss_value = 0.0;  // objective at x^(t-1), where the step was taken
  double distance = 0.0;    // ||x^(t) - x^(t-1)||_2
  bool misclassified = false;
  double cw_margin = 0.0;   // CW loss at x^(t)
  bool aborted = false;     // filler after a restart aborted on a loss error
  Vector x;
};

struct IterateIndex {
  std::size_t run = 0;
  std::size_t restart = 0;
  std::size_t t = 0;

  friend bool operator==(const IterateIndex&, const IterateIndex&) = default;
};

struct AttackOutcome {
  bool success = false;
  Vector adversary;
  IterateIndex best;
  /// PGD steps executed (across runs and restarts) before the first
  /// misclassified iterate; 0 when the start point already is.
  std::optional<std::size_t> steps_to_success;
  std::vector<IterateRecord> trace;  // starting points are not recorded
  std::vector<std::string> aborts;
};

// --- projection and steps ---------------------------------------------------

namespace detail {

inline void check_same_dim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("vector dimensions differ");
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

inline double l2_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Relative slack under which an l2 candidate counts as already inside the
// ball; it makes projection idempotent bit-for-bit.
inline constexpr double kBallSlack = 1e-12;

}  // namespace detail

/// ||a - b||_p
inline double perturbation_norm(std::span<const double> a, std::span<const double> b, Norm p) {
  detail::check_same_dim(a, b);
  if (p == Norm::Two) return detail::l2_distance(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Projects onto the eps-ball around `origin`, then clamps to the box.
/// Coordinates (inf) or vectors (l2) already inside the ball are returned
/// unchanged, so project(project(v)) == project(v) bitwise.
inline Vector project(std::span<const double> candidate, std::span<const double> origin,
                      const ThreatModel& threat) {
  detail::check_same_dim(candidate, origin);
  const double eps = threat.eps;
  Vector out(candidate.begin(), candidate.end());
  if (threat.p == Norm::Inf) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = candidate[i] - origin[i];
      if (d > eps) out[i] = origin[i] + eps;
      else if (d < -eps) out[i] = origin[i] - eps;
    }
  } else {
    const double norm = detail::l2_distance(candidate, origin);
    if (norm > eps * (1.0 + detail::kBallSlack)) {
      const double scale = eps / norm;
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = origin[i] + (candidate[i] - origin[i]) * scale;
    }
  }
  if (threat.box)
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

/// True if v lies in S(origin) up to `tol`.
inline bool is_feasible(std::span<const double> v, std::span<const double> origin,
                        const ThreatModel& threat, double tol = 1e-9) {
  if (v.size() != origin.size()) return false;
  if (perturbation_norm(v, origin, threat.p) > threat.eps + tol) return false;
  if (threat.box)
    for (double e : v)
      if (e < 0.0 || e > 1.0) return false;
  return true;
}

inline Vector init_point(std::span<const double> x0, const InitStrategy& strategy,
                         const ThreatModel& threat, Rng& rng) {
  if (std::holds_alternative<CleanInit>(strategy)) return Vector(x0.begin(), x0.end());
  Vector start(x0.begin(), x0.end());
  for (double& v : start) {
    const double u = uniform(rng, -1.0, 1.0);
    v += threat.eps * static_cast<double>((u > 0.0) - (u < 0.0));
  }
  return project(start, x0, threat);
}

/// sign(g) for p = inf, g / ||g||_2 for p = 2. A vanishing l2 gradient
/// (||g|| <= 1e-20) yields the zero direction.
inline Vector ascent_direction(std::span<const double> grad, Norm p) {
  Vector dir(grad.size(), 0.0);
  if (p == Norm::Inf) {
    for (std::size_t i = 0; i < grad.size(); ++i)
      dir[i] = static_cast<double>((grad[i] > 0.0) - (grad[i] < 0.0));
  } else {
    const double n = detail::l2_norm(grad);
    if (n > 1e-20)
      for (std::size_t i = 0; i < grad.size(); ++i) dir[i] = grad[i] / n;
  }
  return dir;
}

/// x_{t+1} = P_S[x_t + eta * direction(grad)]
inline Vector ascent_step(std::span<const double> x_t, std::span<const double> x0,
                          std::span<const double> grad, double eta, const ThreatModel& threat) {
  detail::check_same_dim(x_t, grad);
  const Vector dir = ascent_direction(grad, threat.p);
  Vector cand(x_t.begin(), x_t.end());
  for (std::size_t i = 0; i < cand.size(); ++i) cand[i] += eta * dir[i];
  return project(cand, x0, threat);
}

inline Vector pgd_step(const Classifier& model, std::span<const double> x_t,
                       std::span<const double> x0, std::size_t y, SurrogateKind kind, double eta,
                       const ThreatModel& threat) {
  if (!(eta > 0.0)) throw ConfigError("step size must be positive");
  const Vector g = input_gradient(model, x_t, y, kind);
  return ascent_step(x_t, x0, g, eta, threat);
}

// --- the attack loop --------------------------------------------------------

namespace detail {

// One single-objective PGD run (possibly with restarts) with iteration-
// dependent loss selection. `offset` shifts the step-schedule index so an
// ensemble constituent sees the same step sizes as the matching stage.
struct RunPlan {
  std::size_t run = 0;
  std::size_t iterations = 0;
  std::size_t offset = 0;
  std::size_t schedule_total = 0;
  bool convex = false;
  double gamma = 0.5;
  std::function<std::size_t(std::size_t)> stage;  // local t -> stage
  std::function<SurrogateKind(std::size_t)> kind; // stage -> surrogate
  SurrogateKind second = SurrogateKind::CW;       // convex partner
};

class BestTracker {
 public:
  void offer(std::span<const double> x, const IterateIndex& idx, bool misclassified,
             double margin, std::size_t steps_before) {
    if (misclassified) {
      if (!first_success) first_success = steps_before;
      if (!best || margin > best_margin) {
        best = idx;
        best_margin = margin;
        best_x.assign(x.begin(), x.end());
      }
    }
    last = idx;
    last_x.assign(x.begin(), x.end());
  }

  std::optional<IterateIndex> best;
  double best_margin = -std::numeric_limits<double>::infinity();
  Vector best_x;
  IterateIndex last;
  Vector last_x;
  std::optional<std::size_t> first_success;
};

struct PointStatus {
  bool misclassified;
  double margin;
};

inline PointStatus status_at(const Classifier& model, std::span<const double> x, std::size_t y) {
  const Vector z = forward(model, x);
  return {argmax(z) != y, cw_loss(z, y)};
}

inline void execute_plan(const Classifier& model, const LabeledExample& ex,
                         const AttackConfig& cfg, const RunPlan& plan, Rng& rng,
                         AttackOutcome& out, BestTracker& tracker, std::size_t& steps_done) {
  const ThreatModel& threat = cfg.threat;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    Vector x = init_point(ex.x, cfg.init, threat, rng);
    {
      const PointStatus s = status_at(model, x, ex.y);
      tracker.offer(x, {plan.run, r, 0}, s.misclassified, s.margin, steps_done);
    }
    bool aborted = false;
    for (std::size_t t = 0; t < plan.iterations; ++t) {
      IterateRecord rec;
      rec.run = plan.run;
      rec.restart = r;
      rec.t = t + 1;
      rec.stage = plan.stage(t);
      rec.loss = plan.kind(rec.stage);
      rec.convex = plan.convex;
      rec.step = step_size(cfg.steps, t + plan.offset, plan.schedule_total);
      if (!aborted) {
        try {
          const Backprop bp = backprop_objective(model, x, [&](std::span<const double> z) {
            if (plan.convex)
              return convex_loss_and_gradient({plan.gamma, rec.loss, plan.second}, z, ex.y);
            return loss_value_and_logit_gradient(rec.loss, z, ex.y);
          });
          Vector next = ascent_step(x, ex.x, bp.input_grad, rec.step, threat);
          rec.loss_value = bp.loss;
          rec.distance = l2_distance(next, x);
          x = std::move(next);
        } catch (const DegenerateLossError& e) {
          aborted = true;
          out.aborts.push_back("run " + std::to_string(plan.run) + " restart " +
                               std::to_string(r) + " t " + std::to_string(t) + ": " + e.what());
        }
      }
      rec.aborted = aborted;
      const PointStatus s = status_at(model, x, ex.y);
      rec.misclassified = s.misclassified;
      rec.cw_margin = s.margin;
      if (!aborted)
        tracker.offer(x, {plan.run, r, t + 1}, s.misclassified, s.margin, steps_done + t + 1);
      rec.x = x;
      out.trace.push_back(std::move(rec));
    }
    steps_done += plan.iterations;
  }
}

inline void check_model_fit(const Classifier& model, const LabeledExample& ex,
                            const AttackConfig& cfg) {
  if (ex.x.size() != model.input_dim()) throw ShapeError("example does not fit the model input");
  if (ex.y >= model.num_classes()) throw RangeError("label out of range for the model");
  for (SurrogateKind k : cfg.losses.stages)
    if (k == SurrogateKind::DLR && model.num_classes() < 3)
      throw ConfigError("DLR needs a model with at least 3 classes");
}

inline AttackOutcome finish(AttackOutcome out, const BestTracker& tracker) {
  out.success = tracker.best.has_value();
  if (out.success) {
    out.adversary = tracker.best_x;
    out.best = *tracker.best;
  } else {
    out.adversary = tracker.last_x;
    out.best = tracker.last;
  }
  out.steps_to_success = tracker.first_success;
  return out;
}

}  // namespace detail

inline AttackOutcome ensemble_or_attack(const Classifier& model, const LabeledExample& example,
                                        const AttackConfig& base, Rng& rng);

/// Multi-stage PGD. Under Alternate, stage k uses losses.stages[k] for
/// ceil(kT/K) <= t < ceil((k+1)T/K) and starts from the last iterate of
/// stage k-1. The returned adversary is the misclassified iterate with the
/// largest CW margin over all restarts, or the final iterate when none is.
inline AttackOutcome run_pgd(const Classifier& model, const LabeledExample& example,
                             const AttackConfig& config, Rng& rng) {
  validate_config(config);
  if (config.combiner.kind == CombinerKind::EnsembleOr)
    return ensemble_or_attack(model, example, config, rng);
  detail::check_model_fit(model, example, config);

  const std::size_t T = config.iterations;
  const std::size_t K = config.losses.size();
  detail::RunPlan plan;
  plan.iterations = T;
  plan.schedule_total = T;
  plan.kind = [&](std::size_t k) { return config.losses.stages[k]; };
  if (config.combiner.kind == CombinerKind::Convex) {
    plan.convex = true;
    plan.gamma = config.combiner.gamma;
    plan.second = config.losses.stages[1];
    plan.stage = [](std::size_t) { return std::size_t{0}; };
  } else {
    plan.stage = [T, K](std::size_t t) { return stage_of(t, T, K); };
  }

  AttackOutcome out;
  out.trace.reserve(config.restarts * T);
  detail::BestTracker tracker;
  std::size_t steps = 0;
  detail::execute_plan(model, example, config, plan, rng, out, tracker, steps);
  return detail::finish(std::move(out), tracker);
}

/// Seeds the generator from the init strategy (0 for a clean start).
inline AttackOutcome run_pgd(const Classifier& model, const LabeledExample& example,
                             const AttackConfig& config) {
  const auto* rs = std::get_if<RandomSignInit>(&config.init);
  Rng rng(rs ? rs->seed : 0);
  return run_pgd(model, example, config, rng);
}

/// K independent single-loss runs, run k using losses.stages[k] for the
/// length of stage k of the alternating split and the same step sizes that
/// stage would see. Each starts per `base.init` from the clean point;
/// success is the OR over runs.
inline AttackOutcome ensemble_or_attack(const Classifier& model, const LabeledExample& example,
                                        const AttackConfig& base, Rng& rng) {
  validate_config(base);
  if (base.losses.size() < 2) throw ConfigError("ensemble-OR needs at least two losses");
  detail::check_model_fit(model, example, base);

  const std::size_t T = base.iterations;
  const std::size_t K = base.losses.size();
  AttackOutcome out;
  out.trace.reserve(base.restarts * T);
  detail::BestTracker tracker;
  std::size_t steps = 0;
  for (std::size_t k = 0; k < K; ++k) {
    detail::RunPlan plan;
    plan.run = k;
    plan.offset = stage_start(k, T, K);
    plan.iterations = stage_start(k + 1, T, K) - plan.offset;
    plan.schedule_total = T;
    const SurrogateKind kind = base.losses.stages[k];
    plan.stage = [k](std::size_t) { return k; };
    plan.kind = [kind](std::size_t) { return kind; };
    detail::execute_plan(model, example, base, plan, rng, out, tracker, steps);
  }
  return detail::finish(std::move(out), tracker);
}

inline AttackOutcome ensemble_or_attack(const Classifier& model, const LabeledExample& example,
                                        const AttackConfig& base) {
  const auto* rs = std::get_if<RandomSignInit>(&base.init);
  Rng rng(rs ? rs->seed : 0);
  return ensemble_or_attack(model, example, base, rng);
}

/// Human-readable attack label: "CE", "CE&CW", "CONVEX(0.25:CE,CW)", "ENS(CE|CW)".
inline std::string attack_label(const AttackConfig& c) {
  switch (c.combiner.kind) {
    case CombinerKind::Alternate: return schedule_label(c.losses);
    case CombinerKind::Convex: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", c.combiner.gamma);
      return std::string("CONVEX(") + buf + ":" + std::string(to_string(c.losses.stages[0])) +
             "," + std::string(to_string(c.losses.stages[1])) + ")";
    }
    case CombinerKind::EnsembleOr: {
      std::string s = "ENS(";
      for (std::size_t i = 0; i < c.losses.size(); ++i) {
        if (i) s += '|';
        s += to_string(c.losses.stages[i]);
      }
      return s + ")";
    }
  }
  return "?";
}

}  // namespace altpgd
