#include "sieveope/integration.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace sieveope {

namespace {

std::pair<std::vector<double>, std::vector<double>> compute_gauss_legendre(int m) {
  std::vector<double> x(static_cast<std::size_t>(m));
  std::vector<double> w(static_cast<std::size_t>(m));
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = z;
      for (int j = 2; j <= m; ++j) {
        const double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double weight = 2.0 / ((1.0 - z * z) * dp * dp);
    x[static_cast<std::size_t>(i)] = -z;
    x[static_cast<std::size_t>(m - 1 - i)] = z;
    w[static_cast<std::size_t>(i)] = weight;
    w[static_cast<std::size_t>(m - 1 - i)] = weight;
  }
  if (m % 2 == 1) x[static_cast<std::size_t>(m / 2)] = 0.0;
  return {std::move(x), std::move(w)};
}

void accumulate_policy_features(const env::PolicySpec& policy, const basis::FeatureSystem& fs,
                                double s, double weight, std::span<double> probs,
                                Eigen::VectorXd& out) {
  policy.probabilities(1, s, probs);
  double band[32];
  const std::size_t width = fs.support_width();
  const int first = fs.state_band(s, std::span<double>(band, width));
  for (int a = 0; a < fs.action_count(); ++a) {
    const double pa = probs[static_cast<std::size_t>(a)];
    if (pa == 0.0) continue;
    const auto base = static_cast<Eigen::Index>(a) * fs.k() + first;
    for (std::size_t j = 0; j < width; ++j) {
      out[base + static_cast<Eigen::Index>(j)] += weight * pa * band[j];
    }
  }
}

}  // namespace

const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int nodes) {
  if (nodes < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
  static std::mutex mutex;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  const std::lock_guard lock(mutex);
  auto it = cache.find(nodes);
  if (it == cache.end()) it = cache.emplace(nodes, compute_gauss_legendre(nodes)).first;
  return it->second;
}

Eigen::VectorXd initial_feature_mean(const env::EnvSpec& env, const env::PolicySpec& policy,
                                     const basis::FeatureSystem& features,
                                     const Integration& integration) {
  if (policy.action_count() != features.action_count()) {
    throw std::invalid_argument("initial_feature_mean: policy and features disagree on action count");
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features.dimension()));
  std::vector<double> probs(static_cast<std::size_t>(policy.action_count()));

  if (const auto* pmf = std::get_if<env::PmfInitial>(&env.initial())) {
    for (std::size_t s = 0; s < pmf->pmf.size(); ++s) {
      if (pmf->pmf[s] == 0.0) continue;
      accumulate_policy_features(policy, features, static_cast<double>(s), pmf->pmf[s], probs, mean);
    }
    return mean;
  }

  const auto* uni = std::get_if<env::UniformInitial>(&env.initial());
  if (uni == nullptr) throw std::invalid_argument("initial_feature_mean: unsupported initial distribution");
  const double lo = uni->lo;
  const double hi = uni->hi;
  const double density = 1.0 / (hi - lo);

  if (const auto* mc = std::get_if<MonteCarloIntegration>(&integration)) {
    if (mc->samples == 0) throw std::invalid_argument("initial_feature_mean: zero Monte Carlo samples");
    Rng rng(mc->seed);
    const double w = 1.0 / static_cast<double>(mc->samples);
    for (std::size_t j = 0; j < mc->samples; ++j) {
      accumulate_policy_features(policy, features, lo + (hi - lo) * uniform01(rng), w, probs, mean);
    }
    return mean;
  }

  const int nodes = std::get<Quadrature>(integration).nodes;
  const auto& [x, w] = gauss_legendre(nodes);

  std::vector<double> cuts{lo, hi};
  for (const double k : features.knots()) {
    if (k > lo && k < hi) cuts.push_back(k);
  }
  for (const double b : policy.breakpoints()) {
    if (b > lo && b < hi) cuts.push_back(b);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  for (std::size_t piece = 0; piece + 1 < cuts.size(); ++piece) {
    const double a = cuts[piece];
    const double b = cuts[piece + 1];
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t j = 0; j < x.size(); ++j) {
      accumulate_policy_features(policy, features, mid + half * x[j], density * half * w[j], probs, mean);
    }
  }
  return mean;
}

}  // namespace sieveope
