#include "sieveope/mis.hpp"

#include <ostream>
#include <stdexcept>
#include <string>

#include "sieveope/csv.hpp"

namespace sieveope::mis {

void MisWeights::write_csv(std::ostream& out) const {
  std::string buf = "episode,t,weight\n";
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    for (Eigen::Index t = 0; t < weights.cols(); ++t) {
      buf += std::to_string(i) + ',' + std::to_string(t + 1) + ',' + csv::format_double(weights(i, t)) + '\n';
    }
  }
  out << buf;
}

MisWeights compute_weights(const env::TrajectoryBatch& batch, const env::PolicySpec& target,
                           std::span<const basis::FeatureSystem> features, const env::EnvSpec& env,
                           const regress::LambdaRule& lambda, const Integration& integration) {
  const int horizon = batch.horizon();
  if (static_cast<int>(features.size()) != horizon) {
    throw std::invalid_argument("compute_weights: need one feature system per step");
  }
  const std::size_t n = batch.episodes();
  MisWeights out;
  out.weights.resize(static_cast<Eigen::Index>(n), horizon);
  out.propagated.reserve(static_cast<std::size_t>(horizon));

  Eigen::VectorXd u = initial_feature_mean(env, target, features[0], integration);
  std::vector<double> probs(static_cast<std::size_t>(target.action_count()));

  for (int t = 1; t <= horizon; ++t) {
    const auto& fs = features[static_cast<std::size_t>(t - 1)];
    if (static_cast<std::size_t>(u.size()) != fs.dimension()) {
      throw std::invalid_argument("compute_weights: feature dimension mismatch at step " + std::to_string(t));
    }
    out.propagated.push_back(u);

    const Design x = fs.design(batch.step_states(t), batch.step_actions(t));
    Eigen::VectorXd z;
    try {
      const Eigen::MatrixXd g = regress::gram(x);
      z = regress::RegularizedGram(g, lambda.resolve(g)).solve(u);
    } catch (const regress::SingularMatrixError& e) {
      throw regress::SingularMatrixError("mis step " + std::to_string(t) + ": " + e.what(), t);
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.weights(static_cast<Eigen::Index>(i), t - 1) = x.row_dot(i, z);
    }
    if (t == horizon) break;

    const auto& next_fs = features[static_cast<std::size_t>(t)];
    const auto next_states = batch.step_states(t + 1);
    Eigen::VectorXd next_u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(next_fs.dimension()));
    double band[32];
    const std::size_t width = next_fs.support_width();
    for (std::size_t i = 0; i < n; ++i) {
      const double w = out.weights(static_cast<Eigen::Index>(i), t - 1);
      const double s = next_states[i];
      target.probabilities(t + 1, s, probs);
      const int first = next_fs.state_band(s, std::span<double>(band, width));
      for (int a = 0; a < next_fs.action_count(); ++a) {
        const double p = probs[static_cast<std::size_t>(a)];
        if (p == 0.0) continue;
        const auto base = static_cast<Eigen::Index>(a) * next_fs.k() + first;
        for (std::size_t j = 0; j < width; ++j) next_u[base + static_cast<Eigen::Index>(j)] += w * p * band[j];
      }
    }
    u = next_u / static_cast<double>(n);
  }
  return out;
}

double mis_value(const env::TrajectoryBatch& batch, const MisWeights& weights) {
  const auto n = static_cast<Eigen::Index>(batch.episodes());
  if (weights.weights.rows() != n || weights.weights.cols() != batch.horizon()) {
    throw std::invalid_argument("mis_value: weight dimensions do not match the batch");
  }
  double total = 0.0;
  for (int t = 1; t <= batch.horizon(); ++t) {
    const auto r = batch.step_rewards(t);
    double step = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) step += weights.weights(i, t - 1) * r[static_cast<std::size_t>(i)];
    total += step / static_cast<double>(n);
  }
  return total;
}

double kappa_hat(const env::TrajectoryBatch& pi_batch, const env::TrajectoryBatch& b_batch,
                 std::span<const basis::FeatureSystem> features, const regress::LambdaRule& lambda) {
  const int horizon = b_batch.horizon();
  if (pi_batch.horizon() != horizon) throw std::invalid_argument("kappa_hat: batch horizons differ");
  if (static_cast<int>(features.size()) != horizon) {
    throw std::invalid_argument("kappa_hat: need one feature system per step");
  }
  double total = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    const auto& fs = features[static_cast<std::size_t>(t - 1)];
    const Design xb = fs.design(b_batch.step_states(t), b_batch.step_actions(t));
    const Design xp = fs.design(pi_batch.step_states(t), pi_batch.step_actions(t));
    Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fs.dimension()));
    for (std::size_t i = 0; i < xp.rows(); ++i) xp.add_row_to(i, 1.0, m);
    m /= static_cast<double>(xp.rows());
    const Eigen::MatrixXd g = regress::gram(xb);
    const regress::RegularizedGram factor(g, lambda.resolve(g));
    total += m.dot(factor.solve(m));
  }
  return total / horizon;
}

}  // namespace sieveope::mis
