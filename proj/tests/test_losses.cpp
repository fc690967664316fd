#include <gtest/gtest.h>

#include <cmath>

#include "altpgd/losses.hpp"
#include "altpgd/rng.hpp"
#include "oracles.hpp"

using namespace altpgd;

namespace {

const Vector kToyLogits{0.105, -0.442, -0.4875};

Vector random_logits(Rng& rng, std::size_t c, double scale = 4.0) {
  Vector z(c);
  for (double& v : z) v = uniform(rng, -scale, scale);
  return z;
}

}  // namespace

TEST(CrossEntropy, UniformLogits) { EXPECT_NEAR(ce_loss(Vector{0.0, 0.0}, 0), std::log(2.0), 1e-15); }

TEST(CrossEntropy, ToyLogits) {
  // 40-digit reference: 0.75688528271493087...
  EXPECT_NEAR(ce_loss(kToyLogits, 0), 0.7568852827149309, 1e-15);
}

TEST(CrossEntropy, LargeLogitsDoNotOverflow) {
  const double v = ce_loss(Vector{1000.0, 0.0}, 0);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(v, 0.0);
  EXPECT_LT(v, 1e-300);
  EXPECT_NEAR(ce_loss(Vector{1000.0, 0.0}, 1), 1000.0, 1e-12);
}

TEST(CrossEntropy, RejectsOutOfRangeLabel) {
  EXPECT_THROW(ce_loss(Vector{0.0, 1.0}, 2), RangeError);
  EXPECT_THROW(cw_loss(Vector{0.0, 1.0}, 5), RangeError);
}

TEST(CarliniWagner, ToyLogits) { EXPECT_NEAR(cw_loss(kToyLogits, 0), -0.547, 1e-15); }

TEST(CarliniWagner, TieIsZero) { EXPECT_EQ(cw_loss(Vector{2.0, 2.0, -1.0}, 0), 0.0); }

TEST(CarliniWagner, DirectFormula) { EXPECT_EQ(cw_loss(Vector{1.0, 3.0, 2.0}, 0), 2.0); }

TEST(DifferenceOfLogitsRatio, Values) {
  EXPECT_DOUBLE_EQ(dlr_loss(Vector{2.0, 1.0, 0.0}, 0), -0.5);
  EXPECT_DOUBLE_EQ(dlr_loss(Vector{20.0, 10.0, 0.0}, 0), -0.5);
}

TEST(DifferenceOfLogitsRatio, DegenerateDenominator) {
  EXPECT_THROW(dlr_loss(Vector{1.0, 1.0, 1.0}, 0), DegenerateLossError);
  EXPECT_THROW(loss_value_and_logit_gradient(SurrogateKind::DLR, Vector{1.0, 1.0, 1.0}, 0),
               DegenerateLossError);
}

TEST(DifferenceOfLogitsRatio, NeedsThreeClasses) {
  EXPECT_THROW(dlr_loss(Vector{1.0, 0.0}, 0), ShapeError);
}

TEST(LogitGradient, CeSymmetric) {
  const auto g = loss_value_and_logit_gradient(SurrogateKind::CE, Vector{0.0, 0.0}, 0);
  EXPECT_DOUBLE_EQ(g.gradient[0], -0.5);
  EXPECT_DOUBLE_EQ(g.gradient[1], 0.5);
}

TEST(LogitGradient, CwIndicator) {
  const auto g = loss_value_and_logit_gradient(SurrogateKind::CW, Vector{1.0, 3.0, 2.0}, 0);
  EXPECT_EQ(g.gradient, (Vector{-1.0, 1.0, 0.0}));
  EXPECT_EQ(g.value, 2.0);
}

TEST(LogitGradient, CwTieGoesToLowestIndex) {
  const auto g = loss_value_and_logit_gradient(SurrogateKind::CW, Vector{0.0, 3.0, 3.0}, 0);
  EXPECT_EQ(g.gradient, (Vector{-1.0, 1.0, 0.0}));
}

TEST(LogitGradient, MatchesFiniteDifferences) {
  Rng rng(2024);
  for (SurrogateKind kind : {SurrogateKind::CE, SurrogateKind::CW, SurrogateKind::DLR}) {
    int checked = 0;
    while (checked < 100) {
      const std::size_t c = 3 + rng() % 6;
      const Vector z = random_logits(rng, c);
      const std::size_t y = rng() % c;
      if (oracle::logit_gap(z) < 1e-3) continue;
      const auto lg = loss_value_and_logit_gradient(kind, z, y);
      const auto fd = oracle::central_fd([&](const Vector& v) { return loss_value(kind, v, y); }, z);
      EXPECT_LE(oracle::vec_rel_err(lg.gradient, fd), 1e-6) << to_string(kind);
      ++checked;
    }
  }
}

TEST(LossProperties, CeDominatesCwAndIsNonNegative) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t c = 2 + rng() % 9;
    const Vector z = random_logits(rng, c, 10.0);
    const std::size_t y = rng() % c;
    EXPECT_GE(ce_loss(z, y), cw_loss(z, y));
    EXPECT_GE(ce_loss(z, y), 0.0);
  }
}

TEST(LossProperties, CwPositiveIffMisclassified) {
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const Vector z = random_logits(rng, 5);
    const std::size_t y = rng() % 5;
    const bool misclassified = detail::argmax(z) != y;
    EXPECT_EQ(cw_loss(z, y) > 0.0, misclassified);
  }
}

TEST(LossProperties, ShiftAndScaleInvariance) {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const Vector z = random_logits(rng, 6);
    const std::size_t y = rng() % 6;
    const double alpha = uniform(rng, -50.0, 50.0);
    Vector shifted = z;
    for (double& v : shifted) v += alpha;
    EXPECT_NEAR(ce_loss(shifted, y), ce_loss(z, y), 1e-9);
    EXPECT_NEAR(cw_loss(shifted, y), cw_loss(z, y), 1e-9);
    EXPECT_NEAR(dlr_loss(shifted, y), dlr_loss(z, y), 1e-9);
    for (double c : {1e-3, 0.1, 10.0, 1e3}) {
      Vector scaled = z;
      for (double& v : scaled) v *= c;
      EXPECT_NEAR(dlr_loss(scaled, y), dlr_loss(z, y), 1e-9);
    }
  }
}

TEST(StageOf, ThreeStages) {
  EXPECT_EQ(stage_of(0, 100, 3), 0u);
  EXPECT_EQ(stage_of(33, 100, 3), 0u);
  EXPECT_EQ(stage_of(34, 100, 3), 1u);
  EXPECT_EQ(stage_of(67, 100, 3), 2u);
  EXPECT_EQ(stage_of(99, 100, 3), 2u);
}

TEST(StageOf, TwoStagesSwitchAtMidpoint) {
  EXPECT_EQ(stage_of(49, 100, 2), 0u);
  EXPECT_EQ(stage_of(50, 100, 2), 1u);
}

TEST(StageOf, SingleStage) {
  for (std::size_t t = 0; t < 100; ++t) EXPECT_EQ(stage_of(t, 100, 1), 0u);
}

TEST(StageOf, MatchesRealValuedInequality) {
  // stage k (0-based) iff k T/K <= t < (k+1) T/K, evaluated in exact rationals
  for (std::size_t T : {1, 7, 50, 100, 101}) {
    for (std::size_t K = 1; K <= std::min<std::size_t>(T, 5); ++K) {
      for (std::size_t t = 0; t < T; ++t) {
        std::size_t expected = 0;
        for (std::size_t k = 0; k < K; ++k)
          if (k * T <= t * K && t * K < (k + 1) * T) expected = k;
        EXPECT_EQ(stage_of(t, T, K), expected) << "T=" << T << " K=" << K << " t=" << t;
      }
      for (std::size_t k = 0; k <= K; ++k) {
        const std::size_t s = stage_start(k, T, K);
        if (k < K) EXPECT_EQ(stage_of(s, T, K), k);
        if (k > 0 && s > 0) EXPECT_EQ(stage_of(s - 1, T, K), k - 1);
      }
    }
  }
}

TEST(StageOf, Errors) {
  EXPECT_THROW(stage_of(100, 100, 2), RangeError);
  EXPECT_THROW(stage_of(0, 100, 0), ConfigError);
  EXPECT_THROW(stage_of(0, 2, 3), ConfigError);
}

TEST(ConvexCombination, Endpoints) {
  const Vector z{0.3, -1.2, 2.0, 0.1};
  for (std::size_t y = 0; y < z.size(); ++y) {
    const auto ce = loss_value_and_logit_gradient(SurrogateKind::CE, z, y);
    const auto cw = loss_value_and_logit_gradient(SurrogateKind::CW, z, y);
    const auto g1 = convex_loss_and_gradient({1.0, SurrogateKind::CE, SurrogateKind::CW}, z, y);
    const auto g0 = convex_loss_and_gradient({0.0, SurrogateKind::CE, SurrogateKind::CW}, z, y);
    EXPECT_EQ(g1.value, ce.value);
    EXPECT_EQ(g1.gradient, ce.gradient);
    EXPECT_EQ(g0.value, cw.value);
    EXPECT_EQ(g0.gradient, cw.gradient);
  }
}

TEST(ConvexCombination, QuarterWeightAtToyLogits) {
  const auto g = convex_loss_and_gradient({0.25, SurrogateKind::CE, SurrogateKind::CW}, kToyLogits, 0);
  // 0.25 * 0.75688528271493087 + 0.75 * (-0.547)
  EXPECT_NEAR(g.value, -0.22102867932126728, 1e-14);
}

TEST(ConvexCombination, RejectsGammaOutsideUnitInterval) {
  EXPECT_THROW(convex_loss_and_gradient({1.5, SurrogateKind::CE, SurrogateKind::CW}, kToyLogits, 0),
               ConfigError);
}

TEST(SurrogateNames, ParseAndLabel) {
  EXPECT_EQ(parse_surrogate("CE"), SurrogateKind::CE);
  EXPECT_EQ(parse_surrogate("dlr"), SurrogateKind::DLR);
  EXPECT_FALSE(parse_surrogate("mse").has_value());
  EXPECT_EQ(schedule_label({{SurrogateKind::CE, SurrogateKind::CW, SurrogateKind::DLR}}), "CE&CW&DLR");
}

TEST(LossValues, MatchExtendedPrecision) {
  Rng rng(1000);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t c = 3 + rng() % 8;
    const Vector z = random_logits(rng, c, 8.0);
    const std::size_t y = rng() % c;
    EXPECT_LE(oracle::rel_err(ce_loss(z, y), oracle::ce(z, y)), 1e-10);
    EXPECT_LE(oracle::rel_err(cw_loss(z, y), oracle::cw(z, y)), 1e-10);
    EXPECT_LE(oracle::rel_err(dlr_loss(z, y), oracle::dlr(z, y)), 1e-10);
  }
}
