#pragma once

// The shipped desk-scale benchmark: three Gaussian blobs in the unit square,
// a 32-32 ReLU MLP trained plainly or with PGD-CE adversaries, attacked in
// the l-inf ball of radius 0.12 with fixed step eps/4 and T = 100.

#include <cstdint>
#include <vector>

#include "altpgd/attack.hpp"
#include "altpgd/dataset.hpp"
#include "altpgd/schedules.hpp"
#include "altpgd/trainer.hpp"

namespace altpgd::bench {

inline constexpr std::uint64_t kTrainSeed = 11;
inline constexpr std::uint64_t kTestSeed = 12;
inline constexpr std::uint64_t kInitSeed = 7;
inline constexpr double kBlobStddev = 0.12;
inline constexpr std::size_t kTrainPerClass = 200;
inline constexpr std::size_t kTestPerClass = 400;
inline constexpr double kEps = 0.12;
inline constexpr std::size_t kIterations = 100;

inline std::vector<Vector> blob_centers() { return {{0.3, 0.3}, {0.7, 0.3}, {0.5, 0.7}}; }

inline Dataset train_set() {
  return make_blobs(blob_centers(), kBlobStddev, kTrainPerClass, kTrainSeed, "blobs3-train");
}

inline Dataset test_set() {
  return make_blobs(blob_centers(), kBlobStddev, kTestPerClass, kTestSeed, "blobs3-test");
}

inline ThreatModel threat() { return {Norm::Inf, kEps, true}; }

inline ArchSpec arch() { return {{32, 32}}; }

inline TrainOptions plain_training() { return {300, 0.5, kInitSeed, std::nullopt}; }

inline TrainOptions adversarial_training() {
  TrainOptions opt = plain_training();
  opt.adversarial = AdversarialTraining{threat(), 10, 0.0};
  return opt;
}

/// T = 100, fixed step eps/4, clean start, no restarts.
inline AttackConfig attack(LossSchedule losses) {
  AttackConfig c;
  c.iterations = kIterations;
  c.threat = threat();
  c.losses = std::move(losses);
  c.steps = make_paper_schedule("fixed-quarter", kEps, kIterations);
  return c;
}

}  // namespace altpgd::bench
