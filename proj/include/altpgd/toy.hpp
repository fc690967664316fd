#pragma once

// Two-dimensional, three-class linear toy problem on which PGD with the CW
// margin stalls on the boundary of the l2 disk while CE keeps moving.

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "altpgd/attack.hpp"
#include "altpgd/models.hpp"

namespace altpgd {

struct ToyProblem {
  Matrix weights{3, 2, {0.3, -0.3, 1.0, -0.01, -0.25, 0.75}};
  Vector x{-0.45, -0.8};
  std::size_t y = 0;
  ThreatModel threat{Norm::Two, 0.4, false};
  double eta = 0.8;  // 2 eps
  std::size_t iterations = 50;

  Classifier model() const { return Classifier::linear(weights); }
  LabeledExample example() const { return {x, y}; }

  AttackConfig config(LossSchedule losses) const {
    AttackConfig c;
    c.iterations = iterations;
    c.threat = threat;
    c.losses = std::move(losses);
    c.steps = FixedStep{eta};
    return c;
  }
};

struct ToyRun {
  std::string label;  // "CE", "CW", "CE&CW"
  AttackOutcome outcome;
  std::vector<Vector> iterates;  // x^(1) .. x^(T)
  std::vector<std::size_t> predictions;
  std::vector<double> losses;    // active surrogate at each iterate
};

/// The three toy runs: CE alone, CW alone, and CE then CW (switch at T/2).
inline std::vector<ToyRun> toy_trajectories(const ToyProblem& toy = {}) {
  const Classifier model = toy.model();
  const LabeledExample ex = toy.example();
  const std::vector<LossSchedule> schedules{
      {{SurrogateKind::CE}}, {{SurrogateKind::CW}}, {{SurrogateKind::CE, SurrogateKind::CW}}};
  std::vector<ToyRun> runs;
  for (const auto& s : schedules) {
    ToyRun run;
    run.label = schedule_label(s);
    run.outcome = run_pgd(model, ex, toy.config(s));
    for (const IterateRecord& rec : run.outcome.trace) {
      const Vector z = forward(model, rec.x);
      run.iterates.push_back(rec.x);
      run.predictions.push_back(detail::argmax(z));
      run.losses.push_back(loss_value(rec.loss, z, ex.y));
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

/// CSV with header run,t,x0,x1,pred,loss.
inline void write_toy_csv(std::ostream& os, const ToyRun& run) {
  os << "run,t,x0,x1,pred,loss\n";
  for (std::size_t i = 0; i < run.iterates.size(); ++i) {
    os << run.label << ',' << (i + 1) << ',' << format_real(run.iterates[i][0]) << ','
       << format_real(run.iterates[i][1]) << ',' << run.predictions[i] << ','
       << format_real(run.losses[i]) << '\n';
  }
}

}  // namespace altpgd
