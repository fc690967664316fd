#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "altpgd/model_io.hpp"
#include "altpgd/models.hpp"
#include "altpgd/toy.hpp"
#include "oracles.hpp"

using namespace altpgd;

namespace {

Classifier toy_model() { return ToyProblem{}.model(); }

Classifier identity2() { return Classifier::linear(Matrix(2, 2, {1.0, 0.0, 0.0, 1.0})); }

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("altpgd_test_" + name);
}

}  // namespace

TEST(Forward, ToyLogitsMatchNestedLoopProduct) {
  const Vector x{-0.45, -0.8};
  const Vector z = forward(toy_model(), x);
  const auto ref = oracle::matvec({{0.3, -0.3}, {1.0, -0.01}, {-0.25, 0.75}}, x);
  ASSERT_EQ(z.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(z[i], ref[i]);
  EXPECT_NEAR(z[0], 0.105, 1e-15);
  EXPECT_NEAR(z[1], -0.442, 1e-15);
  EXPECT_NEAR(z[2], -0.4875, 1e-15);
}

TEST(Forward, IdentityModel) {
  EXPECT_EQ(forward(identity2(), Vector{0.3, 0.7}), (Vector{0.3, 0.7}));
}

TEST(Forward, DeterministicAndShapeChecked) {
  Rng rng(1);
  const Classifier m = oracle::random_mlp(4, 3, {8, 8}, rng);
  const Vector x{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(forward(m, x), forward(m, x));
  EXPECT_THROW(forward(m, Vector{0.1, 0.2}), ShapeError);
}

TEST(Predict, ToyIsCorrect) { EXPECT_EQ(predict(toy_model(), Vector{-0.45, -0.8}), 0u); }

TEST(Predict, TiesAndArgmax) {
  const Classifier m = Classifier::linear(Matrix(3, 1, {1.0, 1.0, 1.0}));
  EXPECT_EQ(predict(m, Vector{0.5}), 0u);
  const Classifier lin = Classifier::linear(Matrix(3, 1, {1.0, 3.0, 2.0}));
  EXPECT_EQ(predict(lin, Vector{1.0}), 1u);
}

TEST(Classifier, RejectsNonComposingLayers) {
  std::vector<Layer> layers{{Matrix(4, 2), Vector(4), Activation::Relu},
                            {Matrix(3, 5), Vector(3), Activation::Identity}};
  EXPECT_THROW(Classifier{layers}, ShapeError);
  EXPECT_THROW(Classifier::linear(Matrix(1, 2)), ShapeError);
}

TEST(InputGradient, LinearCwIsRowDifference) {
  const Classifier m = toy_model();
  const Vector x{-0.45, -0.8};
  // j* = 1, so the gradient is W[1] - W[0]
  const Vector g = input_gradient(m, x, 0, SurrogateKind::CW);
  EXPECT_NEAR(g[0], 0.7, 1e-15);
  EXPECT_NEAR(g[1], 0.29, 1e-15);
  const auto fd = oracle::central_fd(
      [&](const Vector& v) { return cw_loss(forward(m, v), 0); }, x);
  EXPECT_LE(oracle::vec_rel_err(g, fd), 1e-8);
}

TEST(InputGradient, CeVanishesAtFullConfidence) {
  // softmax puts 1 - 1e-12 on class 0
  const double a = std::log(1e12);
  const Vector g = input_gradient(identity2(), Vector{a, 0.0}, 0, SurrogateKind::CE);
  EXPECT_LT(std::hypot(g[0], g[1]), 1e-6);
}

TEST(InputGradient, MatchesFiniteDifferencesThroughMlps) {
  Rng rng(31);
  for (SurrogateKind kind : {SurrogateKind::CE, SurrogateKind::CW, SurrogateKind::DLR}) {
    int checked = 0;
    while (checked < 100) {
      const std::size_t d = 2 + rng() % 4;
      const std::size_t c = 3 + rng() % 3;
      std::vector<std::size_t> hidden;
      const std::size_t depth = rng() % 3;
      for (std::size_t i = 0; i < depth; ++i) hidden.push_back(4 + rng() % 13);
      const Classifier m = oracle::random_mlp(d, c, hidden, rng);
      Vector x(d);
      for (double& v : x) v = uniform(rng, -1.0, 1.0);
      const std::size_t y = rng() % c;
      if (oracle::min_relu_margin(m, x) < 1e-3) continue;
      if (oracle::logit_gap(forward(m, x)) < 1e-3) continue;
      const Vector g = input_gradient(m, x, y, kind);
      const auto fd = oracle::central_fd(
          [&](const Vector& v) { return loss_value(kind, forward(m, v), y); }, x);
      EXPECT_LE(oracle::vec_rel_err(g, fd), 1e-4) << to_string(kind);
      ++checked;
    }
  }
}

TEST(Linearity, ZeroHiddenLayerModelsAreAffine) {
  Rng rng(5);
  Matrix w(4, 3);
  for (double& v : w.data) v = uniform(rng, -2.0, 2.0);
  const Classifier m = Classifier::linear(w, Vector{0.1, -0.2, 0.3, 0.0});
  for (int i = 0; i < 50; ++i) {
    Vector x(3), d(3);
    for (double& v : x) v = uniform(rng, -1.0, 1.0);
    for (double& v : d) v = uniform(rng, -1.0, 1.0);
    Vector xd = x;
    for (std::size_t j = 0; j < 3; ++j) xd[j] += d[j];
    const Vector z0 = forward(m, x);
    const Vector z1 = forward(m, xd);
    for (std::size_t r = 0; r < 4; ++r) {
      double wd = 0.0;
      for (std::size_t j = 0; j < 3; ++j) wd += w(r, j) * d[j];
      EXPECT_NEAR(z1[r] - z0[r], wd, 1e-12);
    }
  }
}

TEST(Concurrency, SharedModelAcrossThreads) {
  Rng rng(77);
  const Classifier m = oracle::random_mlp(3, 4, {16, 16}, rng);
  const Vector x{0.2, -0.4, 0.9};
  const Vector ref = input_gradient(m, x, 2, SurrogateKind::CE);
  std::vector<Vector> got(8);
  {
    std::vector<std::jthread> ts;
    for (std::size_t i = 0; i < got.size(); ++i)
      ts.emplace_back([&, i] {
        for (int k = 0; k < 200; ++k) got[i] = input_gradient(m, x, 2, SurrogateKind::CE);
      });
  }
  for (const auto& g : got) EXPECT_EQ(g, ref);
}

TEST(ModelFile, RoundTripIsBitExact) {
  Rng rng(3);
  const Classifier m = oracle::random_mlp(5, 3, {7, 6}, rng);
  const auto path = temp_file("roundtrip.bin");
  save_model(m, path);
  const Classifier back = load_model(path);
  EXPECT_EQ(back, m);
  const Vector x{0.1, 0.9, -0.3, 0.5, 0.0};
  const Vector a = forward(m, x);
  const Vector b = forward(back, x);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i]));
  std::filesystem::remove(path);
}

TEST(ModelFile, HeaderLayout) {
  std::ostringstream os;
  write_model(os, toy_model());
  const std::string bytes = os.str();
  ASSERT_GE(bytes.size(), 18u);
  EXPECT_EQ(bytes.substr(0, 4), "APGD");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);  // version, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 2);  // D
  EXPECT_EQ(static_cast<unsigned char>(bytes[10]), 3); // C
  EXPECT_EQ(static_cast<unsigned char>(bytes[14]), 1); // layers
  // magic + version + 3 u32 + (2 u32 + u8 + 6 weights + 3 biases)
  EXPECT_EQ(bytes.size(), 4u + 2 + 12 + 8 + 1 + 8 * 9);
}

TEST(ModelFile, TruncatedFileIsMalformed) {
  std::ostringstream os;
  write_model(os, toy_model());
  const std::string bytes = os.str();
  for (std::size_t cut : {std::size_t{2}, std::size_t{9}, bytes.size() - 1}) {
    std::istringstream is(bytes.substr(0, cut));
    EXPECT_THROW(read_model(is), FormatError) << "cut at " << cut;
  }
  std::istringstream bad("XXXX");
  EXPECT_THROW(read_model(bad), FormatError);
}

TEST(ModelFile, InconsistentDimensions) {
  std::ostringstream os;
  write_model(os, toy_model());
  std::string bytes = os.str();
  bytes[6] = 5;  // header D no longer matches the layer's column count
  std::istringstream is(bytes);
  EXPECT_THROW(read_model(is), ShapeError);

  std::string wrong_c = os.str();
  wrong_c[10] = 4;
  std::istringstream is2(wrong_c);
  EXPECT_THROW(read_model(is2), ShapeError);
}

TEST(ModelFile, MissingFile) {
  EXPECT_THROW(load_model("/nonexistent/dir/model.bin"), Error);
}
