#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sieveope/basis.hpp"
#include "sieveope/env.hpp"

namespace sieveope {

/// Composite Gauss-Legendre rule with `nodes` points on every piece between
/// consecutive breakpoints (knots, policy discontinuities, domain ends).
struct Quadrature {
  int nodes = 201;
};

/// Plain Monte Carlo over `samples` draws from the initial distribution.
struct MonteCarloIntegration {
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};

using Integration = std::variant<Quadrature, MonteCarloIntegration>;

/// Gauss-Legendre nodes and weights on [-1, 1]; cached per size.
const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int nodes);

/// E over s ~ rho_1, a ~ pi_1(.|s) of phi(s, a). Tabular initial laws are
/// summed exactly; interval laws use `integration`.
Eigen::VectorXd initial_feature_mean(const env::EnvSpec& env, const env::PolicySpec& policy,
                                     const basis::FeatureSystem& features,
                                     const Integration& integration);

}  // namespace sieveope
