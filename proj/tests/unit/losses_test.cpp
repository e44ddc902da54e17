#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "valrl/agents.hpp"
#include "valrl/errors.hpp"

namespace {

using namespace valrl::agents;
using valrl::Rng;
using valrl::net::MlpSpec;
using valrl::net::ParameterSet;

TEST(DqnLoss, ValueAndGradientMatchOracle) {
  Rng rng(10);
  const MlpSpec spec{6, {8, 8}, 3};
  const ParameterSet online = valrl::net::init_mlp(spec, rng);
  const ParameterSet target = valrl::net::init_mlp(spec, rng);
  const auto batch = fixtures::random_batch(5, 6, 3, 3, rng);
  const auto result = dqn_loss(batch, online, target, spec, 0.9);
  EXPECT_NEAR(result.loss, oracle::dqn_loss(batch, online, target, spec, 0.9), 1e-13);
  EXPECT_NEAR(std::accumulate(result.per_sample.begin(), result.per_sample.end(), 0.0) / 5.0, result.loss, 1e-13);
  const auto fd = oracle::finite_difference(
      online, [&](const ParameterSet& p) { return oracle::dqn_loss(batch, p, target, spec, 0.9); });
  EXPECT_LT(oracle::relative_error(result.grads, fd), 1e-6);
}

TEST(DqnLoss, TargetIgnoresBootstrapOnTerminal) {
  Rng rng(11);
  const MlpSpec spec{2, {4}, 2};
  const ParameterSet target = valrl::net::init_mlp(spec, rng);
  auto batch = fixtures::random_batch(4, 2, 2, 1, rng);
  for (std::size_t i = 0; i < 4; ++i) batch.terminal_within_n[i] = 1;
  const auto y = dqn_target(batch, target, spec, 0.99);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(y[i], batch.n_step_returns[i]);
}

TEST(Projection, MatchesFloorCeilOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    CategoricalConfig cfg{2 + rng.uniform_index(6), -rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0)};
    auto p = fixtures::uniform_vector(cfg.num_atoms, rng);
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= s;
    const double reward = rng.uniform(-4.0, 4.0);
    const double gamma = rng.bernoulli(0.2) ? 0.0 : rng.uniform();
    const auto got = categorical_projection(cfg, p, reward, gamma);
    const auto want = oracle::projection(cfg, p, reward, gamma);
    double mass = 0.0;
    for (std::size_t i = 0; i < cfg.num_atoms; ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-12);
      mass += got[i];
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
  }
}

TEST(Projection, TerminalCollapsesOntoReward) {
  const CategoricalConfig cfg{5, -1.0, 1.0};
  const std::vector<double> p{0.2, 0.2, 0.2, 0.2, 0.2};
  const auto m = categorical_projection(cfg, p, 0.25, 0.0);
  EXPECT_NEAR(m[2], 0.5, 1e-15);
  EXPECT_NEAR(m[3], 0.5, 1e-15);
  const auto clipped = categorical_projection(cfg, p, 7.0, 0.0);
  EXPECT_DOUBLE_EQ(clipped[4], 1.0);
  EXPECT_THROW(categorical_projection(cfg, std::vector<double>{0.5, 0.5, 0.5, 0.0, 0.0}, 0.0, 0.5),
               valrl::ContractViolation);
}

TEST(CategoricalLoss, ValueAndGradientMatchOracle) {
  Rng rng(13);
  const CategoricalConfig cfg{7, -2.0, 2.0};
  const std::size_t actions = 3;
  const MlpSpec spec{4, {6}, actions * cfg.num_atoms};
  const ParameterSet online = valrl::net::init_mlp(spec, rng);
  const ParameterSet target = valrl::net::init_mlp(spec, rng);
  const auto batch = fixtures::random_batch(4, 4, actions, 3, rng, true);
  const auto result = categorical_loss(batch, online, target, spec, cfg, actions, 0.95);
  std::vector<double> per_sample;
  EXPECT_NEAR(result.loss, oracle::categorical_loss(batch, online, target, spec, cfg, actions, 0.95, &per_sample),
              1e-13);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(result.per_sample[i], per_sample[i], 1e-13);
  const auto fd = oracle::finite_difference(online, [&](const ParameterSet& p) {
    return oracle::categorical_loss(batch, p, target, spec, cfg, actions, 0.95);
  });
  EXPECT_LT(oracle::relative_error(result.grads, fd), 1e-6);
}

TEST(CategoricalValues, ExpectedValuePerAction) {
  const CategoricalConfig cfg{3, -1.0, 1.0};
  // Action 0 puts all mass on +1, action 1 is uniform.
  const std::vector<double> logits{-50.0, -50.0, 50.0, 0.0, 0.0, 0.0};
  const auto q = categorical_expected_values(cfg, logits, 2);
  EXPECT_NEAR(q[0], 1.0, 1e-12);
  EXPECT_NEAR(q[1], 0.0, 1e-12);
}

TEST(IqnLoss, ValueAndGradientMatchOracle) {
  Rng rng(14);
  const IqnNetwork net{5, 6, 2, 3, 4};
  IQNConfig cfg;
  cfg.num_tau_samples = 3;
  cfg.num_tau_prime_samples = 4;
  cfg.num_quantile_samples = 5;
  cfg.embedding_dim = 4;
  const ParameterSet online = init_iqn(net, rng);
  const ParameterSet target = init_iqn(net, rng);
  const auto batch = fixtures::random_batch(3, 5, 3, 2, rng, true);
  const auto taus = fixtures::uniform_vector(9, rng);
  const auto primes = fixtures::uniform_vector(12, rng);
  const auto k = fixtures::uniform_vector(15, rng);
  const auto result = iqn_loss_with_taus(batch, online, target, net, cfg, 0.97, taus, primes, k);
  EXPECT_NEAR(result.loss, oracle::iqn_loss(batch, online, target, net, cfg, 0.97, taus, primes, k), 1e-13);
  const auto fd = oracle::finite_difference(online, [&](const ParameterSet& p) {
    return oracle::iqn_loss(batch, p, target, net, cfg, 0.97, taus, primes, k);
  });
  EXPECT_LT(oracle::relative_error(result.grads, fd), 1e-6);
}

TEST(IqnLoss, SampledTausFollowDocumentedOrder) {
  Rng rng(15);
  const IqnNetwork net{3, 4, 1, 2, 4};
  IQNConfig cfg;
  cfg.num_tau_samples = 2;
  cfg.num_tau_prime_samples = 3;
  cfg.num_quantile_samples = 4;
  cfg.embedding_dim = 4;
  const ParameterSet online = init_iqn(net, rng);
  const ParameterSet target = init_iqn(net, rng);
  const auto batch = fixtures::random_batch(2, 3, 2, 1, rng);
  Rng a(77), b(77);
  const auto sampled = iqn_loss(batch, online, target, net, cfg, 0.9, a);
  const auto taus = fixtures::uniform_vector(4, b);
  const auto primes = fixtures::uniform_vector(6, b);
  const auto k = fixtures::uniform_vector(8, b);
  const auto explicit_taus = iqn_loss_with_taus(batch, online, target, net, cfg, 0.9, taus, primes, k);
  EXPECT_EQ(sampled.loss, explicit_taus.loss);
}

TEST(IqnNetwork, ForwardMatchesOracle) {
  Rng rng(16);
  const IqnNetwork net{4, 5, 2, 3, 6};
  const ParameterSet params = init_iqn(net, rng);
  valrl::net::Tensor states = valrl::net::Tensor::matrix(2, 4);
  for (auto& v : states.values()) v = rng.uniform();
  const auto taus = fixtures::uniform_vector(6, rng);
  valrl::net::Tape tape(params);
  const auto out = tape.value(iqn_forward(tape, net, states, taus, 3));
  std::vector<std::vector<double>> rows{{states.row(0).begin(), states.row(0).end()},
                                        {states.row(1).begin(), states.row(1).end()}};
  const auto want = oracle::iqn(params, net, rows, taus, 3);
  ASSERT_EQ(out.rows(), 6u);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out(r, c), want[r][c], 1e-14);
  }
}

TEST(QuantileHuber, AsymmetricWeights) {
  EXPECT_DOUBLE_EQ(quantile_huber(0.5, 0.9, 1.0), 0.9 * 0.125);
  EXPECT_DOUBLE_EQ(quantile_huber(-0.5, 0.9, 1.0), 0.1 * 0.125);
  EXPECT_DOUBLE_EQ(quantile_huber(3.0, 0.25, 2.0), 0.25 * 2.0 * 2.0 / 2.0);
}

TEST(Exploration, LinearDecay) {
  EXPECT_DOUBLE_EQ(linearly_decaying_epsilon(100, 0, 10, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(linearly_decaying_epsilon(100, 10, 10, 0.1), 1.0);
  EXPECT_NEAR(linearly_decaying_epsilon(100, 60, 10, 0.1), 0.55, 1e-12);
  EXPECT_DOUBLE_EQ(linearly_decaying_epsilon(100, 110, 10, 0.1), 0.1);
  EXPECT_DOUBLE_EQ(linearly_decaying_epsilon(100, 5000, 10, 0.1), 0.1);
}

TEST(Exploration, ArgmaxBreaksTiesLow) {
  EXPECT_EQ(argmax(std::vector<double>{1.0, 3.0, 3.0}), 1);
  EXPECT_EQ(argmax(std::vector<double>{-1.0}), 0);
}

TEST(Exploration, EpsilonGreedyRates) {
  Rng rng(17);
  int greedy = 0, calls = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const int a = epsilon_greedy(0.3, 4, rng, [&] {
      ++calls;
      return std::vector<double>{0.0, 0.0, 1.0, 0.0};
    });
    greedy += a == 2;
  }
  // P(action 2) = 0.7 + 0.3 / 4.
  EXPECT_NEAR(greedy / static_cast<double>(n), 0.775, 0.01);
  EXPECT_NEAR(calls / static_cast<double>(n), 0.7, 0.01);
  Rng r0(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(epsilon_greedy(0.0, 3, r0, [] { return std::vector<double>{0, 5, 1}; }), 1);
}

}  // namespace
