#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "valrl/archive.hpp"
#include "valrl/errors.hpp"
#include "valrl/net.hpp"

namespace {

using namespace valrl::net;
using valrl::Rng;

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

std::vector<std::vector<double>> rows_of(const Tensor& t) {
  std::vector<std::vector<double>> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) out[r].assign(t.row(r).begin(), t.row(r).end());
  return out;
}

TEST(Net, ForwardMatchesPlainLoops) {
  Rng rng(1);
  const MlpSpec spec{5, {7, 6}, 3};
  const ParameterSet params = init_mlp(spec, rng);
  const Tensor x = random_matrix(4, 5, rng);
  const Tensor y = forward(params, spec, x);
  const auto want = oracle::mlp(params, spec, rows_of(x));
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(y(r, c), want[r][c], 1e-14);
  }
}

TEST(Net, InitBounds) {
  Rng rng(2);
  ParameterSet p;
  init_dense(p, "layer", 16, 8, rng);
  EXPECT_EQ(p.get("layer.w").shape(), (std::vector<std::size_t>{8, 16}));
  EXPECT_EQ(p.get("layer.b").shape(), (std::vector<std::size_t>{8}));
  for (double v : p.get("layer.w").values()) EXPECT_LE(std::abs(v), 0.25);
  EXPECT_THROW(init_dense(p, "layer", 16, 8, rng), valrl::ContractViolation);
}

TEST(Net, BackwardMatchesFiniteDifferences) {
  Rng rng(3);
  const MlpSpec spec{4, {6, 5}, 3};
  const ParameterSet params = init_mlp(spec, rng);
  const Tensor x = random_matrix(3, 4, rng);
  const Tensor w = random_matrix(3, 3, rng);
  auto f = [&](const ParameterSet& p) {
    const auto y = oracle::mlp(p, spec, rows_of(x));
    double s = 0.0;
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 3; ++c) s += w(r, c) * y[r][c];
    }
    return s;
  };
  Tape tape(params);
  const auto out = mlp_forward(tape, tape.input(x), spec);
  const ParameterSet grads = tape.backward(out, w);
  EXPECT_LT(oracle::relative_error(grads, oracle::finite_difference(params, f)), 1e-7);
}

TEST(Net, MulAndRepeatRowsGradients) {
  Rng rng(4);
  ParameterSet params;
  init_dense(params, "a", 3, 4, rng);
  init_dense(params, "b", 2, 4, rng);
  const Tensor xa = random_matrix(2, 3, rng);
  const Tensor xb = random_matrix(6, 2, rng);
  const Tensor w = random_matrix(6, 4, rng);
  auto f = [&](const ParameterSet& p) {
    Tape t(p);
    const auto ya = t.repeat_rows(t.relu(t.dense(t.input(xa), "a")), 3);
    const auto y = t.mul(ya, t.dense(t.input(xb), "b"));
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * t.value(y)[i];
    return s;
  };
  Tape tape(params);
  const auto ya = tape.repeat_rows(tape.relu(tape.dense(tape.input(xa), "a")), 3);
  const auto y = tape.mul(ya, tape.dense(tape.input(xb), "b"));
  EXPECT_EQ(tape.value(ya).rows(), 6u);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(tape.value(ya)(0, c), tape.value(ya)(2, c));
  EXPECT_LT(oracle::relative_error(tape.backward(y, w), oracle::finite_difference(params, f)), 1e-7);
}

TEST(Net, ShapeErrors) {
  Rng rng(5);
  ParameterSet params;
  init_dense(params, "l", 3, 2, rng);
  Tape tape(params);
  const auto x = tape.input(Tensor::matrix(2, 4));
  EXPECT_THROW(tape.dense(x, "l"), valrl::ContractViolation);
  EXPECT_THROW(tape.dense(x, "missing"), valrl::ContractViolation);
  const auto y = tape.input(Tensor::matrix(3, 4));
  EXPECT_THROW(tape.mul(x, y), valrl::ContractViolation);
  EXPECT_THROW(tape.backward(x, Tensor::matrix(1, 1)), valrl::ContractViolation);
  EXPECT_THROW(tape.backward(99, Tensor::matrix(2, 4)), valrl::ContractViolation);
}

TEST(Net, HuberPieces) {
  EXPECT_DOUBLE_EQ(huber_loss(0.5, 1.0), 0.125);
  EXPECT_DOUBLE_EQ(huber_loss(-3.0, 1.0), 2.5);
  EXPECT_DOUBLE_EQ(huber_loss_grad(0.5, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(huber_loss_grad(-3.0, 1.0), -1.0);
  for (double u : {-2.3, -0.4, 0.7, 1.9}) {
    const double h = 1e-6;
    EXPECT_NEAR(huber_loss_grad(u, 1.0), (huber_loss(u + h, 1.0) - huber_loss(u - h, 1.0)) / (2 * h), 1e-8);
  }
}

TEST(Net, SoftmaxIsStable) {
  std::vector<double> logits{1000.0, 1000.0, -1000.0}, p(3);
  softmax(logits, p);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[2], 0.0);
}

TEST(Net, CrossEntropyGradient) {
  const std::vector<double> logits{0.3, -1.2, 2.0, 0.1};
  const std::vector<double> target{0.1, 0.2, 0.3, 0.4};
  std::vector<double> grad(4);
  const double ce = softmax_cross_entropy(logits, target, grad);
  EXPECT_GT(ce, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    auto up = logits, down = logits;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    EXPECT_NEAR(grad[i], (softmax_cross_entropy(up, target) - softmax_cross_entropy(down, target)) / 2e-6, 1e-8);
  }
  const std::vector<double> bad{0.5, 0.6, 0.0, 0.0};
  EXPECT_THROW(softmax_cross_entropy(logits, bad), valrl::ContractViolation);
}

TEST(Optimizers, AdamFirstStepIsLearningRateTimesSign) {
  ParameterSet p;
  p.add("x", Tensor({2}, std::vector<double>{1.0, -1.0}));
  ParameterSet g = p.zeros_like();
  g.get("x")[0] = 0.3;
  g.get("x")[1] = -5.0;
  Adam adam(p, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  adam.apply(p, g);
  EXPECT_NEAR(p.get("x")[0], 0.9, 1e-7);
  EXPECT_NEAR(p.get("x")[1], -0.9, 1e-7);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Optimizers, AdamMinimizesQuadratic) {
  ParameterSet p;
  p.add("x", Tensor({3}, std::vector<double>{3.0, -2.0, 0.5}));
  Adam adam(p, AdamConfig{0.05});
  for (int i = 0; i < 2000; ++i) {
    ParameterSet g = p.zeros_like();
    for (std::size_t j = 0; j < 3; ++j) g.get("x")[j] = 2.0 * p.get("x")[j];
    adam.apply(p, g);
  }
  for (double v : p.get("x").values()) EXPECT_NEAR(v, 0.0, 1e-3);
}

TEST(Optimizers, RmsPropMinimizesQuadratic) {
  ParameterSet p;
  p.add("x", Tensor({2}, std::vector<double>{1.0, -1.0}));
  RmsProp opt(p, RmsPropConfig{0.01, 0.9, 0.0, 1e-6, true});
  for (int i = 0; i < 3000; ++i) {
    ParameterSet g = p.zeros_like();
    for (std::size_t j = 0; j < 2; ++j) g.get("x")[j] = 2.0 * p.get("x")[j];
    opt.apply(p, g);
  }
  for (double v : p.get("x").values()) EXPECT_NEAR(v, 0.0, 0.05);
}

TEST(Optimizers, NonFiniteGradientLeavesParametersAlone) {
  ParameterSet p;
  p.add("w", Tensor({2}, std::vector<double>{1.0, 2.0}));
  const ParameterSet before = p;
  ParameterSet g = p.zeros_like();
  g.get("w")[1] = NAN;
  Adam adam(p, AdamConfig{});
  try {
    adam.apply(p, g);
    FAIL();
  } catch (const valrl::TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("'w'"), std::string::npos);
  }
  EXPECT_TRUE(p == before);
  EXPECT_EQ(adam.steps(), 0u);
}

TEST(Optimizers, StateSerializes) {
  Rng rng(6);
  ParameterSet p = init_mlp(MlpSpec{2, {3}, 1}, rng);
  ParameterSet g = p.zeros_like();
  for (auto& [name, t] : g) {
    for (auto& v : t.values()) v = rng.uniform(-1, 1);
  }
  Adam a(p, AdamConfig{}), b(p, AdamConfig{});
  ParameterSet pa = p, pb = p;
  a.apply(pa, g);
  valrl::archive::Writer w;
  a.write(w, "opt/");
  pa.write(w, "p/");
  const auto bytes = w.finish();
  const valrl::archive::Reader r(bytes);
  b.read(r, "opt/");
  pb.read(r, "p/");
  a.apply(pa, g);
  b.apply(pb, g);
  EXPECT_TRUE(pa == pb);
}

}  // namespace
