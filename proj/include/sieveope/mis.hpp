#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sieveope/basis.hpp"
#include "sieveope/env.hpp"
#include "sieveope/integration.hpp"
#include "sieveope/regress.hpp"

namespace sieveope::mis {

/// Marginal importance weights implied by linear FQE.
struct MisWeights {
  /// n x T, column t-1 holds w_{., t}.
  Eigen::MatrixXd weights;
  /// u_t: the initial-law row functional pushed through the estimated
  /// transition operators up to step t.
  std::vector<Eigen::VectorXd> propagated;

  /// CSV `episode,t,weight`.
  void write_csv(std::ostream& out) const;
};

/// u_1 = E_{rho_1, pi_1}[phi_1];  z_t = (Sigma_t + lambda_t I)^{-1} u_t;
/// w_{i,t} = z_t^T phi_t(S_{i,t}, A_{i,t});
/// u_{t+1} = (1/n) sum_i w_{i,t} sum_a' pi_{t+1}(a'|S_{i,t+1}) phi_{t+1}(S_{i,t+1}, a').
/// lambda_t is resolved from Sigma_t exactly as fqe::fit does.
MisWeights compute_weights(const env::TrajectoryBatch& batch, const env::PolicySpec& target,
                           std::span<const basis::FeatureSystem> features, const env::EnvSpec& env,
                           const regress::LambdaRule& lambda,
                           const Integration& integration = Quadrature{});

/// sum_t (1/n) sum_i w_{i,t} R_{i,t}
double mis_value(const env::TrajectoryBatch& batch, const MisWeights& weights);

/// Distribution-shift diagnostic restricted to the linear class:
/// (1/T) sum_t m_t^T (Sigma_t + lambda_t I)^{-1} m_t, with m_t the mean
/// target-policy feature vector and Sigma_t the behavior-data Gram matrix.
double kappa_hat(const env::TrajectoryBatch& pi_batch, const env::TrajectoryBatch& b_batch,
                 std::span<const basis::FeatureSystem> features, const regress::LambdaRule& lambda);

}  // namespace sieveope::mis
