#pragma once

// Dataset-level robustness evaluation, ablation tables, successive-iterate
// distance traces and their CSV/text renderings.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "altpgd/attack.hpp"
#include "altpgd/dataset.hpp"
#include "altpgd/errors.hpp"
#include "altpgd/models.hpp"

namespace altpgd {

struct LabeledAttack {
  std::string label;
  AttackConfig config;
};

inline LabeledAttack labeled(AttackConfig c) { return {attack_label(c), std::move(c)}; }

struct AttackRow {
  std::string label;
  std::size_t evaluated = 0;
  std::size_t successes = 0;
  double robust_accuracy = 0.0;
  double asr = 0.0;
  double mean_steps_to_success = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct ExampleRow {
  std::size_t example_id = 0;
  std::string label;
  bool success = false;
  IterateIndex best;
  double perturbation_norm = 0.0;
};

struct EvaluationReport {
  std::string model_name;
  std::string dataset_name;
  std::vector<AttackRow> rows;      // sorted by label
  std::vector<ExampleRow> examples; // grouped by row, then example id

  const AttackRow* find(std::string_view label) const {
    for (const auto& r : rows)
      if (r.label == label) return &r;
    return nullptr;
  }
};

struct EvalOptions {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string model_name = "model";
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(jobs);
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += jobs) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline Rng example_rng(const AttackConfig& c, std::uint64_t seed, std::size_t index) {
  const auto* rs = std::get_if<RandomSignInit>(&c.init);
  return Rng(derive_seed(seed ^ (rs ? rs->seed : 0), index));
}

}  // namespace detail

/// Runs every attack on every example and returns one outcome per example.
/// Example i uses a generator derived from (seed, i), so results do not
/// depend on the job count.
inline std::vector<AttackOutcome> attack_all(const Classifier& model, const Dataset& ds,
                                             const AttackConfig& config,
                                             const EvalOptions& opt = {}) {
  validate_config(config);
  std::vector<AttackOutcome> out(ds.size());
  detail::parallel_for(ds.size(), opt.jobs, [&](std::size_t i) {
    Rng rng = detail::example_rng(config, opt.seed, i);
    out[i] = run_pgd(model, ds.examples[i], config, rng);
  });
  return out;
}

/// Robust accuracy counts clean misclassifications as attack successes.
inline EvaluationReport evaluate(const Classifier& model, const Dataset& ds,
                                 const std::vector<LabeledAttack>& attacks,
                                 const EvalOptions& opt = {}) {
  ds.validate();
  if (ds.dim != model.input_dim()) throw ShapeError("dataset dimension does not match the model");
  if (ds.classes > model.num_classes()) throw ShapeError("dataset has more classes than the model");
  if (ds.empty()) throw ConfigError("cannot evaluate on an empty dataset");

  EvaluationReport report;
  report.model_name = opt.model_name;
  report.dataset_name = ds.name;
  std::vector<std::pair<AttackRow, std::vector<ExampleRow>>> blocks;
  for (const auto& attack : attacks) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<AttackOutcome> outcomes = attack_all(model, ds, attack.config, opt);
    const auto stop = std::chrono::steady_clock::now();

    AttackRow row;
    row.label = attack.label;
    row.evaluated = ds.size();
    row.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    std::vector<ExampleRow> per_example;
    double steps_sum = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto& o = outcomes[i];
      const auto& ex = ds.examples[i];
      // independent re-check of what the attack module reports
      if (!is_feasible(o.adversary, ex.x, attack.config.threat))
        throw InvariantError(attack.label + ": adversary for example " + std::to_string(i) +
                             " is outside the threat set");
      const bool fooled = predict(model, o.adversary) != ex.y;
      if (fooled != o.success)
        throw InvariantError(attack.label + ": success flag disagrees with the prediction");
      if (o.success) {
        ++row.successes;
        steps_sum += static_cast<double>(o.steps_to_success.value_or(0));
      }
      per_example.push_back({i, attack.label, o.success, o.best,
                             perturbation_norm(o.adversary, ex.x, attack.config.threat.p)});
    }
    row.asr = static_cast<double>(row.successes) / static_cast<double>(row.evaluated);
    row.robust_accuracy = 1.0 - row.asr;
    if (row.successes) row.mean_steps_to_success = steps_sum / static_cast<double>(row.successes);
    blocks.emplace_back(std::move(row), std::move(per_example));
  }
  std::stable_sort(blocks.begin(), blocks.end(),
                   [](const auto& a, const auto& b) { return a.first.label < b.first.label; });
  for (auto& [row, per] : blocks) {
    report.rows.push_back(std::move(row));
    for (auto& e : per) report.examples.push_back(std::move(e));
  }
  return report;
}

/// Single-loss rows for every surrogate in `pairs`, plus both orderings of each pair.
inline EvaluationReport ordering_ablation(
    const Classifier& model, const Dataset& ds,
    const std::vector<std::pair<SurrogateKind, SurrogateKind>>& pairs, const AttackConfig& base,
    const EvalOptions& opt = {}) {
  std::vector<LabeledAttack> attacks;
  std::vector<std::string> seen;
  auto add = [&](LossSchedule losses) {
    AttackConfig c = base;
    c.losses = std::move(losses);
    c.combiner = {CombinerKind::Alternate, 0.5};
    LabeledAttack a = labeled(std::move(c));
    if (std::find(seen.begin(), seen.end(), a.label) != seen.end()) return;
    seen.push_back(a.label);
    attacks.push_back(std::move(a));
  };
  for (const auto& [a, b] : pairs) {
    add({{a}});
    add({{b}});
    add({{a, b}});
    add({{b, a}});
  }
  return evaluate(model, ds, attacks, opt);
}

/// Single losses at T and at T/2, ensemble-OR of the two half runs, the convex
/// mix at each gamma (gamma weights `first`), and the alternation first->second.
inline EvaluationReport combiner_ablation(const Classifier& model, const Dataset& ds,
                                          const std::vector<double>& gammas,
                                          const AttackConfig& base, const EvalOptions& opt = {},
                                          SurrogateKind first = SurrogateKind::CE,
                                          SurrogateKind second = SurrogateKind::CW) {
  std::vector<LabeledAttack> attacks;
  const std::size_t T = base.iterations;
  for (SurrogateKind k : {first, second}) {
    AttackConfig full = base;
    full.losses = {{k}};
    full.combiner = {};
    attacks.push_back(labeled(full));

    // the half-budget run is exactly the matching ensemble constituent
    AttackConfig half = full;
    const std::size_t stage = k == first ? 0 : 1;
    const std::size_t a = stage_start(stage, T, 2);
    const std::size_t b = stage_start(stage + 1, T, 2);
    half.iterations = b - a;
    if (const auto* f = std::get_if<FixedStep>(&base.steps)) {
      half.steps = *f;
    } else {
      throw ConfigError("combiner ablation half-budget rows need a fixed step schedule");
    }
    attacks.push_back({std::string(to_string(k)) + "@" + std::to_string(half.iterations), half});
  }
  AttackConfig ens = base;
  ens.losses = {{first, second}};
  ens.combiner = {CombinerKind::EnsembleOr, 0.5};
  attacks.push_back(labeled(ens));
  for (double g : gammas) {
    AttackConfig cvx = base;
    cvx.losses = {{first, second}};
    cvx.combiner = {CombinerKind::Convex, g};
    attacks.push_back(labeled(cvx));
  }
  AttackConfig alt = base;
  alt.losses = {{first, second}};
  alt.combiner = {};
  attacks.push_back(labeled(alt));
  return evaluate(model, ds, attacks, opt);
}

/// values[k-1] is the batch mean of ||x^(k+1) - x^(k)||_2 for k = 1 .. T-1,
/// taken from restart 0.
struct DistanceTrace {
  std::string label;
  std::vector<double> values;

  double at(std::size_t k) const { return values.at(k - 1); }
};

inline DistanceTrace distance_trace(const Classifier& model, const std::vector<LabeledExample>& batch,
                                    const AttackConfig& config, const EvalOptions& opt = {}) {
  if (batch.empty()) throw ConfigError("distance trace needs a nonempty batch");
  validate_config(config);
  const std::size_t T = config.iterations;
  std::vector<std::vector<double>> per(batch.size());
  detail::parallel_for(batch.size(), opt.jobs, [&](std::size_t i) {
    Rng rng = detail::example_rng(config, opt.seed, i);
    const AttackOutcome o = run_pgd(model, batch[i], config, rng);
    std::vector<double>& d = per[i];
    for (const auto& rec : o.trace)
      if (rec.restart == 0) d.push_back(rec.distance);
  });
  DistanceTrace trace;
  trace.label = attack_label(config);
  trace.values.assign(T - 1, 0.0);
  for (std::size_t k = 1; k < T; ++k) {
    double sum = 0.0;
    for (const auto& d : per) sum += d[k];  // record index k holds x^(k+1) - x^(k)
    trace.values[k - 1] = sum / static_cast<double>(batch.size());
  }
  return trace;
}

// --- output -----------------------------------------------------------------

/// attack_label,robust_acc,asr,mean_iters_to_success,wall_ms
/// wall_ms is written as 0 unless `timing` is set, so reruns are byte-identical.
inline void write_report_csv(std::ostream& os, const EvaluationReport& r, bool timing = false) {
  os << "attack_label,robust_acc,asr,mean_iters_to_success,wall_ms\n";
  for (const auto& row : r.rows) {
    os << row.label << ',' << format_real(row.robust_accuracy) << ',' << format_real(row.asr)
       << ',' << format_real(row.mean_steps_to_success) << ','
       << (timing ? format_real(row.wall_ms) : std::string("0")) << '\n';
  }
}

/// example_id,attack_label,success,best_restart,best_t,perturbation_norm
inline void write_examples_csv(std::ostream& os, const EvaluationReport& r) {
  os << "example_id,attack_label,success,best_restart,best_t,perturbation_norm\n";
  for (const auto& e : r.examples) {
    os << e.example_id << ',' << e.label << ',' << (e.success ? 1 : 0) << ',' << e.best.restart
       << ',' << e.best.t << ',' << format_real(e.perturbation_norm) << '\n';
  }
}

/// attack_label,k,mean_l2
inline void write_trace_csv(std::ostream& os, const std::vector<DistanceTrace>& traces) {
  os << "attack_label,k,mean_l2\n";
  for (const auto& tr : traces)
    for (std::size_t k = 1; k <= tr.values.size(); ++k)
      os << tr.label << ',' << k << ',' << format_real(tr.at(k)) << '\n';
}

/// Human-readable table with percentages to two decimals.
inline void write_report_table(std::ostream& os, const EvaluationReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "model: %s  dataset: %s\n", r.model_name.c_str(),
                r.dataset_name.c_str());
  os << buf;
  std::snprintf(buf, sizeof buf, "%-24s %10s %10s %12s\n", "attack", "robust%", "ASR%", "mean-iters");
  os << buf;
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%-24s %10.2f %10.2f %12.2f\n", row.label.c_str(),
                  100.0 * row.robust_accuracy, 100.0 * row.asr, row.mean_steps_to_success);
    os << buf;
  }
}

}  // namespace altpgd
