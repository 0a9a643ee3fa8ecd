#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sieveope/basis.hpp"
#include "sieveope/regress.hpp"
#include "support/oracles.hpp"

using namespace sieveope;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) x(i, j) = z(rng);
  return x;
}

Eigen::VectorXd random_vector(int n, std::uint64_t seed) { return random_matrix(n, 1, seed).col(0); }

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TEST(Solve, InterceptOnlyGivesMean) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
  const Eigen::VectorXd y = (Eigen::VectorXd(4) << 0, 0, 0, 4).finished();
  const auto beta = regress::solve(Design::from_dense(x), view(y), 0.0);
  EXPECT_NEAR(beta[0], 1.0, 1e-15);
}

TEST(Solve, IdentityDesignReturnsResponse) {
  const Eigen::VectorXd y = (Eigen::VectorXd(3) << 1, 2, 3).finished();
  const auto d = Design::from_dense(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_TRUE(regress::gram(d).isApprox(Eigen::MatrixXd::Identity(3, 3) / 3.0));
  EXPECT_LT((regress::solve(d, view(y), 0.0) - y).norm(), 1e-14);
}

TEST(Solve, MatchesPseudoInverseOnRandomProblems) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_matrix(50, 6, seed);
    const auto y = random_vector(50, 100 + seed);
    const auto beta = regress::solve(Design::from_dense(x), view(y), 0.0);
    EXPECT_LT((beta - oracles::pseudo_inverse_solve(x, y)).norm(), 1e-8);
    // Residual is orthogonal to the column space.
    EXPECT_LT((x.transpose() * (y - x * beta)).norm(), 1e-8 * 50);
  }
}

TEST(Solve, RidgeMatchesAugmentedSystem) {
  const auto x = random_matrix(40, 5, 7);
  const auto y = random_vector(40, 8);
  const double lambda = 0.3;
  Eigen::MatrixXd a = x.transpose() * x;
  a.diagonal().array() += 40 * lambda;
  const Eigen::VectorXd expected = a.colPivHouseholderQr().solve(x.transpose() * y);
  EXPECT_LT((regress::solve(Design::from_dense(x), view(y), lambda) - expected).norm(), 1e-10);
}

TEST(Solve, RidgeShrinksCoefficients) {
  const auto x = random_matrix(60, 6, 9);
  const auto y = random_vector(60, 10);
  const auto d = Design::from_dense(x);
  double prev = regress::solve(d, view(y), 0.0).norm();
  for (const double lambda : {1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
    const double norm = regress::solve(d, view(y), lambda).norm();
    EXPECT_LT(norm, prev);
    prev = norm;
  }
}

TEST(Solve, SingularGramThrows) {
  Eigen::MatrixXd x = random_matrix(20, 3, 11);
  x.col(2) = x.col(0);
  const auto y = random_vector(20, 12);
  EXPECT_THROW(regress::solve(Design::from_dense(x), view(y), 0.0), regress::SingularMatrixError);
  EXPECT_NO_THROW(regress::solve(Design::from_dense(x), view(y), 1e-3));
}

TEST(LambdaRule, Resolution) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
  g(0, 0) = 3.0;
  g(1, 1) = 5.0;
  EXPECT_DOUBLE_EQ(regress::LambdaRule::trace_scaled().resolve(g), 1e-8 * 4.0);
  EXPECT_DOUBLE_EQ(regress::LambdaRule::fixed(0.25).resolve(g), 0.25);
}

TEST(Gram, BandedAccumulationMatchesDense) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<double> s(300);
  std::vector<int> a(300);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    a[i] = static_cast<int>(i % 3);
  }
  const auto fs = basis::FeatureSystem::spline(s, 10, 3, 3);
  const auto d = fs.design(s, a);
  const Eigen::MatrixXd x = d.to_dense();
  EXPECT_LT((regress::gram(d) - x.transpose() * x / 300.0).norm(), 1e-14);
  const auto y = random_vector(300, 14);
  EXPECT_LT((regress::cross(d, view(y)) - x.transpose() * y / 300.0).norm(), 1e-14);
}

TEST(Loocv, InterceptOnlyByHand) {
  // Leave-one-out means are 4/3 three times and 0 once.
  const Eigen::VectorXd y = (Eigen::VectorXd(4) << 0, 0, 0, 4).finished();
  const auto r = regress::loocv(Design::from_dense(Eigen::MatrixXd::Ones(4, 1)), view(y), 0.0);
  EXPECT_NEAR(r.score, 16.0 / 3.0, 1e-13);
  EXPECT_EQ(r.dropped, 0u);
}

TEST(Loocv, ResponseInColumnSpanScoresZero) {
  const auto x = random_matrix(25, 4, 15);
  const Eigen::VectorXd y = x * Eigen::Vector4d(1, -2, 0.5, 3);
  EXPECT_LT(regress::loocv(Design::from_dense(x), view(y), 0.0).score, 1e-20);
}

TEST(Loocv, MatchesBruteForceRefits) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto x = random_matrix(30, 4, 20 + seed);
    const auto y = random_vector(30, 40 + seed);
    for (const double lambda : {0.0, 0.01, 0.5}) {
      const double fast = regress::loocv(Design::from_dense(x), view(y), lambda).score;
      const double slow = oracles::brute_force_loocv(x, y, 30 * lambda);
      EXPECT_NEAR(fast, slow, 1e-10 * std::max(1.0, slow));
    }
  }
}

TEST(Loocv, ProblemOverloadAgrees) {
  const auto x = random_matrix(30, 3, 60);
  const auto y = random_vector(30, 61);
  const regress::RegressionProblem p{Design::from_dense(x), y, 0.1};
  EXPECT_EQ(regress::loocv_score(p), regress::loocv(p.design, view(y), 0.1).score);
  EXPECT_EQ(regress::solve(p), regress::solve(p.design, view(y), 0.1));
}

TEST(Loocv, FullLeverageIsUndefined) {
  const Eigen::VectorXd y = (Eigen::VectorXd(3) << 1, 2, 3).finished();
  EXPECT_THROW(regress::loocv(Design::from_dense(Eigen::MatrixXd::Identity(3, 3)), view(y), 0.0),
               std::domain_error);
}

TEST(Loocv, FullLeverageRowsAreDropped) {
  // Row 0 alone spans column 0, so its leverage is one.
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(5, 2);
  x(0, 0) = 1.0;
  x.col(1).tail(4).setOnes();
  const Eigen::VectorXd y = (Eigen::VectorXd(5) << 9, 0, 0, 0, 4).finished();
  const auto r = regress::loocv(Design::from_dense(x), view(y), 0.0);
  EXPECT_EQ(r.dropped, 1u);
  EXPECT_NEAR(r.score, 16.0 / 3.0, 1e-12);
}
