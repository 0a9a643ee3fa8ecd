#include "sieveope/fqe.hpp"

#include <stdexcept>

#include <json.hpp>

namespace sieveope::fqe {

const StepModel& FqeModel::step(int t) const {
  if (t < 1 || t > horizon()) {
    throw std::out_of_range("FqeModel: step " + std::to_string(t) + " outside [1, " +
                            std::to_string(horizon()) + "]");
  }
  return steps[static_cast<std::size_t>(t - 1)];
}

double FqeModel::q_value(int t, double s, int action) const {
  const auto& m = step(t);
  return m.features.dot(s, action, m.beta);
}

double FqeModel::state_value(int t, double s, const env::PolicySpec& policy) const {
  const auto& m = step(t);
  const auto probs = policy.probabilities(t, s);
  double v = 0.0;
  for (int a = 0; a < m.features.action_count(); ++a) {
    const double p = probs[static_cast<std::size_t>(a)];
    if (p != 0.0) v += p * m.features.dot(s, a, m.beta);
  }
  return v;
}

std::vector<basis::FeatureSystem> FqeModel::features() const {
  std::vector<basis::FeatureSystem> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.features);
  return out;
}

std::string FqeModel::to_json() const {
  nlohmann::json j;
  j["T"] = horizon();
  if (lambda_rule.kind == regress::LambdaRule::Kind::Fixed) {
    j["lambda"] = lambda_rule.value;
  } else {
    j["lambda"] = {{"trace_scaled", lambda_rule.value}};
  }
  auto& steps_json = j["steps"] = nlohmann::json::array();
  for (const auto& s : steps) {
    steps_json.push_back({{"K", s.features.k()},
                          {"knots", s.features.knots()},
                          {"beta", std::vector<double>(s.beta.data(), s.beta.data() + s.beta.size())},
                          {"lambda", s.lambda}});
  }
  j["value"] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
  return j.dump(2);
}

std::vector<double> backup_targets(const env::TrajectoryBatch& batch, const env::PolicySpec& target,
                                   int t, const StepModel* next) {
  const auto rewards = batch.step_rewards(t);
  std::vector<double> y(rewards.begin(), rewards.end());
  if (next == nullptr) return y;

  const auto next_states = batch.step_states(t + 1);
  const auto& fs = next->features;
  std::vector<double> probs(static_cast<std::size_t>(target.action_count()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double s = next_states[i];
    target.probabilities(t + 1, s, probs);
    double v = 0.0;
    for (int a = 0; a < fs.action_count(); ++a) {
      const double p = probs[static_cast<std::size_t>(a)];
      if (p != 0.0) v += p * fs.dot(s, a, next->beta);
    }
    y[i] += v;
  }
  return y;
}

FqeModel fit(const env::TrajectoryBatch& batch, const env::PolicySpec& target,
             const FeatureSelector& select, const regress::LambdaRule& lambda) {
  const int horizon = batch.horizon();
  FqeModel model;
  model.lambda_rule = lambda;
  std::vector<std::optional<StepModel>> fitted(static_cast<std::size_t>(horizon));

  for (int t = horizon; t >= 1; --t) {
    const StepModel* next = t < horizon ? &*fitted[static_cast<std::size_t>(t)] : nullptr;
    const auto y = backup_targets(batch, target, t, next);
    const auto states = batch.step_states(t);
    const auto actions = batch.step_actions(t);

    auto features = select(t, states, actions, y);
    if (features.action_count() != target.action_count()) {
      throw std::invalid_argument("fqe::fit: feature and policy action counts differ");
    }
    const Design x = features.design(states, actions);
    try {
      const Eigen::MatrixXd g = regress::gram(x);
      const double lam = lambda.resolve(g);
      const regress::RegularizedGram factor(g, lam);
      Eigen::VectorXd beta = factor.solve(regress::cross(x, y));
      fitted[static_cast<std::size_t>(t - 1)] = StepModel{std::move(features), std::move(beta), lam};
    } catch (const regress::SingularMatrixError& e) {
      throw regress::SingularMatrixError("fqe step " + std::to_string(t) + ": " + e.what(), t);
    }
  }

  model.steps.reserve(fitted.size());
  for (auto& s : fitted) model.steps.push_back(std::move(*s));
  return model;
}

FqeModel fit(const env::TrajectoryBatch& batch, const env::PolicySpec& target,
             std::span<const basis::FeatureSystem> features, const regress::LambdaRule& lambda) {
  if (static_cast<int>(features.size()) != batch.horizon()) {
    throw std::invalid_argument("fqe::fit: need one feature system per step");
  }
  return fit(
      batch, target,
      [&](int t, std::span<const double>, std::span<const int>, std::span<const double>) {
        return features[static_cast<std::size_t>(t - 1)];
      },
      lambda);
}

double estimate_value(FqeModel& model, const env::EnvSpec& env, const env::PolicySpec& target,
                      const Integration& integration) {
  const auto& first = model.step(1);
  const Eigen::VectorXd mean = initial_feature_mean(env, target, first.features, integration);
  model.value = mean.dot(first.beta);
  return *model.value;
}

std::vector<basis::FeatureSystem> spline_features(const env::TrajectoryBatch& batch, int k,
                                                  int degree, int action_count) {
  std::vector<basis::FeatureSystem> out;
  out.reserve(static_cast<std::size_t>(batch.horizon()));
  for (int t = 1; t <= batch.horizon(); ++t) {
    out.push_back(basis::FeatureSystem::spline(batch.step_states(t), k, degree, action_count));
  }
  return out;
}

std::vector<basis::FeatureSystem> indicator_features(const env::EnvSpec& env) {
  return std::vector<basis::FeatureSystem>(
      static_cast<std::size_t>(env.horizon()),
      basis::FeatureSystem::indicator(env.state_count(), env.action_count()));
}

}  // namespace sieveope::fqe
