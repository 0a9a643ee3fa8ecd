#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sieveope/basis.hpp"
#include "sieveope/env.hpp"
#include "sieveope/integration.hpp"
#include "sieveope/regress.hpp"

namespace sieveope::fqe {

/// Fitted Q_t: phi_t(s, a)^T beta_t.
struct StepModel {
  basis::FeatureSystem features;
  Eigen::VectorXd beta;
  double lambda;
};

/// Per-step fitted Q-functions for t = 1..T plus the plug-in value once estimated.
struct FqeModel {
  std::vector<StepModel> steps;
  regress::LambdaRule lambda_rule;
  std::optional<double> value;

  int horizon() const { return static_cast<int>(steps.size()); }
  const StepModel& step(int t) const;

  /// Q_t(s, a), 1 <= t <= T.
  double q_value(int t, double s, int action) const;

  /// sum_a pi_t(a|s) Q_t(s, a).
  double state_value(int t, double s, const env::PolicySpec& policy) const;

  /// Feature systems in step order.
  std::vector<basis::FeatureSystem> features() const;

  /// `{ "T", "lambda", "steps": [{"K", "knots", "beta", "lambda"}], "value" }`
  std::string to_json() const;
};

/// Chooses the step-t feature system inside the backward pass, given the
/// step's states, actions and regression targets.
using FeatureSelector = std::function<basis::FeatureSystem(
    int t, std::span<const double> states, std::span<const int> actions, std::span<const double> targets)>;

/// Backward recursion: for t = T..1 regress R_t + sum_a' pi_{t+1}(a'|S_{t+1}) Q_{t+1}(S_{t+1}, a')
/// on phi_t(S_t, A_t) (the continuation term is 0 at t = T).
/// Singular regressions raise regress::SingularMatrixError carrying the step.
FqeModel fit(const env::TrajectoryBatch& batch, const env::PolicySpec& target,
             const FeatureSelector& select, const regress::LambdaRule& lambda);

/// Same with prebuilt per-step feature systems (features[t-1] for step t).
FqeModel fit(const env::TrajectoryBatch& batch, const env::PolicySpec& target,
             std::span<const basis::FeatureSystem> features, const regress::LambdaRule& lambda);

/// Regression targets for step t given the fitted step t+1 (or nullptr at t = T).
std::vector<double> backup_targets(const env::TrajectoryBatch& batch, const env::PolicySpec& target,
                                   int t, const StepModel* next);

/// Plug-in value: integral of sum_a pi_1(a|s) Q_1(s, a) under rho_1. Stores it in the model.
double estimate_value(FqeModel& model, const env::EnvSpec& env, const env::PolicySpec& target,
                      const Integration& integration = Quadrature{});

/// Spline features with knots from each step's own states.
std::vector<basis::FeatureSystem> spline_features(const env::TrajectoryBatch& batch, int k,
                                                  int degree, int action_count);

/// Indicator features for every step of a tabular environment.
std::vector<basis::FeatureSystem> indicator_features(const env::EnvSpec& env);

}  // namespace sieveope::fqe
