#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "sieveope/fqe.hpp"
#include "sieveope/mis.hpp"
#include "support/oracles.hpp"

using namespace sieveope;

namespace {

env::EnvSpec tabular_env(const oracles::TabularModel& m, int horizon) {
  return env::make_tabular_env(m.transition, m.reward, m.initial, horizon);
}

// max over f of (E_pi f)^2 / E_b f^2 on the state-action grid, averaged over steps.
double eigen_kappa(const std::vector<Eigen::VectorXd>& target, const std::vector<Eigen::VectorXd>& behavior) {
  double total = 0.0;
  for (std::size_t t = 0; t < target.size(); ++t) {
    const Eigen::MatrixXd a = target[t] * target[t].transpose();
    const Eigen::MatrixXd b = behavior[t].asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, b);
    total += solver.eigenvalues().maxCoeff();
  }
  return total / static_cast<double>(target.size());
}

std::vector<Eigen::VectorXd> empirical_marginals(const env::TrajectoryBatch& batch, int states, int actions) {
  std::vector<Eigen::VectorXd> out;
  for (int t = 1; t <= batch.horizon(); ++t) {
    Eigen::VectorXd rho = Eigen::VectorXd::Zero(states * actions);
    for (std::size_t i = 0; i < batch.episodes(); ++i) {
      rho[batch.action(i, t) * states + static_cast<int>(batch.state(i, t))] += 1.0;
    }
    out.push_back(rho / static_cast<double>(batch.episodes()));
  }
  return out;
}

}  // namespace

TEST(MisWeights, FirstStepWeightsAreMarginalRatios) {
  const auto m = oracles::random_tabular_model(3, 2, 1);
  const auto env = tabular_env(m, 3);
  const auto target = env::tabular_policy(oracles::random_policy_table(3, 2, 2));
  const auto batch = env::simulate(env, env::uniform_policy(2), 3000, 3);
  const auto w = mis::compute_weights(batch, target, fqe::indicator_features(env), env, regress::LambdaRule::fixed(0.0));
  const auto rho_pi = oracles::state_action_marginals(m, target, 3);
  const auto rho_hat = empirical_marginals(batch, 3, 2);
  for (std::size_t i = 0; i < batch.episodes(); ++i) {
    const int cell = batch.action(i, 1) * 3 + static_cast<int>(batch.state(i, 1));
    EXPECT_NEAR(w.weights(static_cast<Eigen::Index>(i), 0), rho_pi[0][cell] / rho_hat[0][cell], 1e-10);
  }
}

TEST(MisWeights, SingleCellHasUnitWeights) {
  const auto env = env::make_tabular_env({{{1.0}}}, std::vector<std::vector<double>>{{0.25}}, {1.0}, 4);
  const auto policy = env::uniform_policy(1);
  const auto batch = env::simulate(env, policy, 20, 4);
  const auto w = mis::compute_weights(batch, policy, fqe::indicator_features(env), env, regress::LambdaRule::fixed(0.0));
  EXPECT_LT((w.weights.array() - 1.0).abs().maxCoeff(), 1e-14);
  EXPECT_NEAR(mis::mis_value(batch, w), 1.0, 1e-14);
}

TEST(MisWeights, IndicatorWeightsAverageToOne) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto m = oracles::random_tabular_model(4, 2, 10 + seed);
    const auto env = tabular_env(m, 5);
    const auto target = env::tabular_policy(oracles::random_policy_table(4, 2, 20 + seed));
    const auto batch = env::simulate(env, env::uniform_policy(2), 2000, 30 + seed);
    const auto w = mis::compute_weights(batch, target, fqe::indicator_features(env), env, regress::LambdaRule::fixed(0.0));
    for (int t = 0; t < 5; ++t) EXPECT_NEAR(w.weights.col(t).mean(), 1.0, 1e-10);
  }
}

TEST(MisWeights, AgreeWithFqeForSharedLambda) {
  const auto env = env::make_paper_env(4);
  const auto batch = env::simulate(env, env::uniform_policy(2), 400, 5);
  const auto features = fqe::spline_features(batch, 8, 3, 2);
  for (const char* name : {"a", "b", "c"}) {
    const auto target = env::paper_policy(name, env);
    for (const auto rule : {regress::LambdaRule::fixed(0.0), regress::LambdaRule::fixed(0.01),
                            regress::LambdaRule::trace_scaled()}) {
      auto model = fqe::fit(batch, target, features, rule);
      const double fqe_value = fqe::estimate_value(model, env, target);
      const double mis_value = mis::mis_value(batch, mis::compute_weights(batch, target, features, env, rule));
      EXPECT_NEAR(mis_value, fqe_value, 1e-8 * (1.0 + std::abs(fqe_value))) << name;
    }
  }
}

TEST(MisWeights, ZeroRewardsGiveZeroValue) {
  const auto env = env::make_paper_env(3);
  auto batch = env::simulate(env, env::uniform_policy(2), 200, 6);
  for (std::size_t i = 0; i < batch.episodes(); ++i)
    for (int t = 1; t <= 3; ++t) batch.set_reward(i, t, 0.0);
  const auto target = env::paper_policy("b", env);
  const auto w = mis::compute_weights(batch, target, fqe::spline_features(batch, 6, 3, 2), env,
                                      regress::LambdaRule::trace_scaled());
  EXPECT_EQ(mis::mis_value(batch, w), 0.0);
  EXPECT_EQ(w.propagated.size(), 3u);
}

TEST(MisWeights, CsvLayout) {
  const auto env = env::make_tabular_env({{{1.0}}}, std::vector<std::vector<double>>{{0.0}}, {1.0}, 2);
  const auto policy = env::uniform_policy(1);
  const auto batch = env::simulate(env, policy, 2, 0);
  const auto w = mis::compute_weights(batch, policy, fqe::indicator_features(env), env, regress::LambdaRule::fixed(0.0));
  std::ostringstream out;
  w.write_csv(out);
  EXPECT_EQ(out.str(), "episode,t,weight\n0,1,1\n0,2,1\n1,1,1\n1,2,1\n");
}

TEST(Kappa, BehaviorTargetIsNearOne) {
  const auto m = oracles::random_tabular_model(3, 2, 40);
  const auto env = tabular_env(m, 4);
  const auto b = env::uniform_policy(2);
  const auto b_batch = env::simulate(env, b, 10000, 41);
  const auto pi_batch = env::simulate(env, b, 10000, 42);
  const double k = mis::kappa_hat(pi_batch, b_batch, fqe::indicator_features(env), regress::LambdaRule::trace_scaled());
  EXPECT_GE(k, 0.9);
  EXPECT_LE(k, 1.1);
}

TEST(Kappa, SameBatchWithoutRidgeIsExactlyOne) {
  const auto m = oracles::random_tabular_model(3, 2, 43);
  const auto env = tabular_env(m, 3);
  const auto batch = env::simulate(env, env::uniform_policy(2), 500, 44);
  EXPECT_NEAR(mis::kappa_hat(batch, batch, fqe::indicator_features(env), regress::LambdaRule::fixed(0.0)), 1.0, 1e-12);
}

TEST(Kappa, ShrinksMonotonicallyWithRidge) {
  const auto env = env::make_paper_env(3);
  const auto b_batch = env::simulate(env, env::uniform_policy(2), 1000, 45);
  const auto pi_batch = env::simulate(env, env::paper_policy("c", env), 1000, 46);
  const auto features = fqe::spline_features(b_batch, 8, 3, 2);
  double prev = mis::kappa_hat(pi_batch, b_batch, features, regress::LambdaRule::fixed(0.0));
  for (const double lambda : {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 100.0}) {
    const double k = mis::kappa_hat(pi_batch, b_batch, features, regress::LambdaRule::fixed(lambda));
    EXPECT_LT(k, prev);
    prev = k;
  }
  EXPECT_LT(prev, 0.01);
}

TEST(Kappa, MatchesEigenOracleOnEmpiricalMeasures) {
  const auto m = oracles::random_tabular_model(2, 2, 47);
  const auto env = tabular_env(m, 3);
  const auto target = env::tabular_policy(std::vector<std::vector<double>>{{1.0, 0.0}, {0.0, 1.0}});
  const auto b_batch = env::simulate(env, env::uniform_policy(2), 2000, 48);
  const auto pi_batch = env::simulate(env, target, 2000, 49);
  const double k = mis::kappa_hat(pi_batch, b_batch, fqe::indicator_features(env), regress::LambdaRule::fixed(0.0));
  EXPECT_NEAR(k, eigen_kappa(empirical_marginals(pi_batch, 2, 2), empirical_marginals(b_batch, 2, 2)), 1e-10);
}

TEST(Kappa, ConvergesToPopulationEigenOracle) {
  const auto m = oracles::random_tabular_model(2, 2, 50);
  const auto env = tabular_env(m, 3);
  const auto target = env::tabular_policy(std::vector<std::vector<double>>{{1.0, 0.0}, {0.0, 1.0}});
  const auto b = env::uniform_policy(2);
  const auto b_batch = env::simulate(env, b, 200000, 51);
  const auto pi_batch = env::simulate(env, target, 200000, 52);
  const double k = mis::kappa_hat(pi_batch, b_batch, fqe::indicator_features(env), regress::LambdaRule::fixed(0.0));
  const double oracle = eigen_kappa(oracles::state_action_marginals(m, target, 3), oracles::state_action_marginals(m, b, 3));
  EXPECT_GT(oracle, 1.5);
  EXPECT_NEAR(k, oracle, 0.02);
}
