#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sieveope/basis.hpp"
#include "sieveope/regress.hpp"

using namespace sieveope;
using basis::BSplineBasis;
using basis::FeatureSystem;

namespace {

// Textbook recursive definition, valid for x strictly inside the span.
double naive_bspline(const std::vector<double>& t, int i, int p, double x) {
  if (p == 0) return (t[i] <= x && x < t[i + 1]) ? 1.0 : 0.0;
  double left = 0.0;
  double right = 0.0;
  if (t[i + p] > t[i]) left = (x - t[i]) / (t[i + p] - t[i]) * naive_bspline(t, i, p - 1, x);
  if (t[i + p + 1] > t[i + 1]) {
    right = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * naive_bspline(t, i + 1, p - 1, x);
  }
  return left + right;
}

std::vector<double> uniform_samples(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(BuildKnots, SingleInteriorKnotAtMedianOfSymmetricGrid) {
  std::vector<double> grid(101);
  for (int i = 0; i <= 100; ++i) grid[i] = i / 100.0;
  const auto knots = basis::build_knots(grid, 5, 3);
  ASSERT_EQ(knots.size(), 9u);
  EXPECT_DOUBLE_EQ(knots[4], 0.5);
  const double eps = 1e-9 * 2.0;
  for (int j = 0; j < 4; ++j) {
    EXPECT_DOUBLE_EQ(knots[j], -eps);
    EXPECT_DOUBLE_EQ(knots[5 + j], 1.0 + eps);
  }
}

TEST(BuildKnots, MinimalBasisHasNoInteriorKnots) {
  const std::vector<double> s{0.2, -1.0, 0.7};
  const auto knots = basis::build_knots(s, 4, 3);
  ASSERT_EQ(knots.size(), 8u);
  EXPECT_LT(knots[3], -1.0);
  EXPECT_GT(knots[4], 0.7);
}

TEST(BuildKnots, UniformSampleQuantilesConcentrate) {
  const auto s = uniform_samples(10000, -2.0, 2.0, 17);
  const auto knots = basis::build_knots(s, 7, 3);
  ASSERT_EQ(knots.size(), 11u);
  EXPECT_NEAR(knots[4], -1.0, 0.05);
  EXPECT_NEAR(knots[5], 0.0, 0.05);
  EXPECT_NEAR(knots[6], 1.0, 0.05);
}

TEST(BuildKnots, RejectsTooFewFunctionsAndEmptySamples) {
  const std::vector<double> s{0.0, 1.0};
  EXPECT_THROW(basis::build_knots(s, 3, 3), std::invalid_argument);
  EXPECT_THROW(basis::build_knots(std::vector<double>{}, 5, 3), std::invalid_argument);
}

TEST(BuildKnots, TiedSamplesStillGiveValidBasis) {
  std::vector<double> s(50, 1.0);
  s.push_back(2.0);
  const auto knots = basis::build_knots(s, 8, 3);
  for (std::size_t j = 5; j < knots.size() - 4; ++j) EXPECT_GT(knots[j], knots[j - 1]);
  EXPECT_NO_THROW(BSplineBasis(knots, 3));
}

TEST(BSplineBasis, MatchesRecursiveDefinition) {
  const auto knots = basis::build_knots(uniform_samples(500, -2, 2, 3), 9, 3);
  const BSplineBasis b(knots, 3);
  for (const double x : uniform_samples(200, b.lower() + 1e-9, b.upper() - 1e-9, 4)) {
    const auto v = b.evaluate(x);
    for (int i = 0; i < b.size(); ++i) EXPECT_NEAR(v[i], naive_bspline(knots, i, 3, x), 1e-13);
  }
}

TEST(BSplineBasis, PartitionOfUnityAndLocalSupport) {
  const BSplineBasis b(basis::build_knots(uniform_samples(300, -2, 2, 5), 12, 3), 3);
  for (const double x : uniform_samples(1000, b.lower(), b.upper(), 6)) {
    const auto v = b.evaluate(x);
    EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0), 1.0, 1e-12);
    EXPECT_LE(std::count_if(v.begin(), v.end(), [](double y) { return y != 0.0; }), 4);
    for (const double y : v) EXPECT_GE(y, 0.0);
  }
}

TEST(BSplineBasis, ClampedEndpointsInterpolate) {
  const BSplineBasis b = BSplineBasis::uniform(-2, 2, 8, 3);
  const auto left = b.evaluate(b.lower());
  const auto right = b.evaluate(b.upper());
  EXPECT_DOUBLE_EQ(left.front(), 1.0);
  EXPECT_DOUBLE_EQ(right.back(), 1.0);
  EXPECT_DOUBLE_EQ(std::accumulate(left.begin(), left.end(), 0.0), 1.0);
  // Out-of-span points clamp to the boundary.
  EXPECT_EQ(b.evaluate(-7.0), left);
  EXPECT_EQ(b.evaluate(9.0), right);
}

TEST(BSplineBasis, RejectsUnclampedOrDecreasingKnots) {
  EXPECT_THROW(BSplineBasis({0, 0, 0, 0.5, 1, 1, 1, 1}, 3), std::invalid_argument);
  EXPECT_THROW(BSplineBasis({0, 0, 0, 0, 0.7, 0.5, 1, 1, 1, 1}, 3), std::invalid_argument);
}

TEST(BSplineBasis, LeastSquaresReproducesCubics) {
  const auto states = uniform_samples(400, -2, 2, 8);
  const auto fs = FeatureSystem::spline(states, 9, 3, 1);
  auto cubic = [](double x) { return 0.3 - 1.2 * x + 0.5 * x * x + 0.25 * x * x * x; };
  std::vector<double> y;
  for (const double s : states) y.push_back(cubic(s));
  const std::vector<int> actions(states.size(), 0);
  const auto beta = regress::solve(fs.design(states, actions), y, 0.0);
  double worst = 0.0;
  for (const double s : states) worst = std::max(worst, std::abs(fs.dot(s, 0, beta) - cubic(s)));
  EXPECT_LT(worst, 1e-8);
}

TEST(FeatureSystem, ActionBlocks) {
  const FeatureSystem fs(BSplineBasis::uniform(0, 1, 4, 2), 2);  // K = 4, quadratic
  ASSERT_EQ(fs.dimension(), 8u);
  const auto psi = fs.eval_state_basis(0.3);
  const auto phi0 = fs.feature_map(0.3, 0);
  const auto phi1 = fs.feature_map(0.3, 1);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(phi0[k], psi[k]);
    EXPECT_EQ(phi0[4 + k], 0.0);
    EXPECT_EQ(phi1[k], 0.0);
    EXPECT_EQ(phi1[4 + k], psi[k]);
  }
  EXPECT_THROW(fs.feature_map(0.3, 2), std::out_of_range);
  EXPECT_THROW(fs.feature_map(0.3, -1), std::out_of_range);
}

TEST(FeatureSystem, BlockNormsAndOrthogonality) {
  const auto samples = uniform_samples(200, -2, 2, 9);
  const auto fs = FeatureSystem::spline(samples, 8, 3, 3);
  for (const double s : uniform_samples(100, -2.5, 2.5, 10)) {
    const auto psi = fs.eval_state_basis(s);
    const double psi_norm = std::inner_product(psi.begin(), psi.end(), psi.begin(), 0.0);
    for (int a = 0; a < 3; ++a) {
      const auto phi = fs.feature_map(s, a);
      EXPECT_NEAR(std::inner_product(phi.begin(), phi.end(), phi.begin(), 0.0), psi_norm, 1e-15);
      for (int b = a + 1; b < 3; ++b) {
        const auto other = fs.feature_map(s, b);
        EXPECT_EQ(std::inner_product(phi.begin(), phi.end(), other.begin(), 0.0), 0.0);
      }
    }
  }
}

TEST(FeatureSystem, DesignRowsMatchFeatureMap) {
  const auto states = uniform_samples(30, -2, 2, 11);
  std::vector<int> actions;
  for (int i = 0; i < 30; ++i) actions.push_back(i % 2);
  const auto fs = FeatureSystem::spline(states, 6, 3, 2);
  const Eigen::MatrixXd x = fs.design(states, actions).to_dense();
  for (int i = 0; i < 30; ++i) {
    const auto phi = fs.feature_map(states[i], actions[i]);
    for (int j = 0; j < 12; ++j) EXPECT_EQ(x(i, j), phi[j]);
  }
}

TEST(FeatureSystem, IndicatorIsOneHot) {
  const auto fs = FeatureSystem::indicator(3, 2);
  EXPECT_EQ(fs.k(), 3);
  EXPECT_EQ(fs.feature_map(2.0, 1), (std::vector<double>{0, 0, 0, 0, 0, 1}));
  EXPECT_EQ(fs.feature_map(0.0, 0), (std::vector<double>{1, 0, 0, 0, 0, 0}));
  EXPECT_THROW(fs.eval_state_basis(3.0), std::out_of_range);
  EXPECT_THROW(fs.eval_state_basis(0.5), std::out_of_range);
}

TEST(SplineCurve, EvaluatesCoefficientCombination) {
  const auto b = BSplineBasis::uniform(-2, 2, 8, 3);
  std::vector<double> c(8);
  std::iota(c.begin(), c.end(), 1.0);
  const basis::SplineCurve f(b, c);
  for (const double x : {-2.0, -0.7, 0.0, 1.3, 2.0}) {
    const auto v = b.evaluate(x);
    EXPECT_NEAR(f(x), std::inner_product(v.begin(), v.end(), c.begin(), 0.0), 1e-14);
  }
  EXPECT_THROW(basis::SplineCurve(b, {1.0, 2.0}), std::invalid_argument);
}
