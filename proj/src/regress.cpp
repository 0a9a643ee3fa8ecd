#include "sieveope/regress.hpp"

#include <cmath>

namespace sieveope::regress {

namespace {

// Pivots below this fraction of the largest diagonal entry count as zero.
constexpr double kPivotTolerance = 1e-13;

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

double LambdaRule::resolve(const Eigen::MatrixXd& gram) const {
  if (kind == Kind::Fixed) {
    if (!(value >= 0.0)) throw std::invalid_argument("LambdaRule: lambda must be >= 0");
    return value;
  }
  if (gram.rows() == 0) return 0.0;
  return value * gram.trace() / static_cast<double>(gram.rows());
}

Eigen::MatrixXd gram(const Design& x) {
  const auto d = static_cast<Eigen::Index>(x.cols());
  const std::size_t w = x.width();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto band = x.band(i);
    const auto off = static_cast<Eigen::Index>(x.offset(i));
    for (std::size_t a = 0; a < w; ++a) {
      if (band[a] == 0.0) continue;
      for (std::size_t b = 0; b <= a; ++b) {
        g(off + static_cast<Eigen::Index>(a), off + static_cast<Eigen::Index>(b)) += band[a] * band[b];
      }
    }
  }
  Eigen::MatrixXd full = g.selfadjointView<Eigen::Lower>();
  if (x.rows() > 0) full /= static_cast<double>(x.rows());
  return full;
}

Eigen::VectorXd cross(const Design& x, std::span<const double> y) {
  if (y.size() != x.rows()) throw std::invalid_argument("cross: response length differs from row count");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.cols()));
  for (std::size_t i = 0; i < x.rows(); ++i) x.add_row_to(i, y[i], c);
  if (x.rows() > 0) c /= static_cast<double>(x.rows());
  return c;
}

RegularizedGram::RegularizedGram(const Eigen::MatrixXd& gram, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("RegularizedGram: lambda must be >= 0");
  Eigen::MatrixXd a = gram;
  a.diagonal().array() += lambda;
  if (!a.allFinite()) throw std::invalid_argument("RegularizedGram: non-finite entries");
  llt_.compute(a);
  const double scale = a.diagonal().maxCoeff();
  bool ok = llt_.info() == Eigen::Success && scale > 0.0;
  if (ok) {
    const auto pivots = llt_.matrixLLT().diagonal().array().square();
    ok = pivots.minCoeff() > kPivotTolerance * scale;
  }
  if (!ok) {
    throw SingularMatrixError("singular Gram matrix (dimension " + std::to_string(a.rows()) +
                              ", lambda " + std::to_string(lambda) + ")");
  }
}

Eigen::MatrixXd RegularizedGram::inverse() const {
  const auto d = llt_.rows();
  return llt_.solve(Eigen::MatrixXd::Identity(d, d));
}

Eigen::VectorXd solve(const Design& x, std::span<const double> y, double lambda) {
  if (x.rows() == 0) throw std::invalid_argument("solve: empty design");
  for (const double v : y) {
    if (!std::isfinite(v)) throw std::invalid_argument("solve: non-finite response");
  }
  const RegularizedGram factor(gram(x), lambda);
  return factor.solve(cross(x, y));
}

Eigen::VectorXd solve(const RegressionProblem& problem) {
  return solve(problem.design, as_span(problem.response), problem.lambda);
}

LoocvResult loocv(const Design& x, std::span<const double> y, double lambda) {
  const std::size_t n = x.rows();
  if (n < 2) throw std::invalid_argument("loocv: need at least two samples");
  if (y.size() != n) throw std::invalid_argument("loocv: response length differs from row count");

  const RegularizedGram factor(gram(x), lambda);
  const Eigen::VectorXd beta = factor.solve(cross(x, y));
  const Eigen::MatrixXd inv = factor.inverse();

  // H = X (X^T X + n lambda I)^{-1} X^T = X inv X^T / n.
  const std::size_t w = x.width();
  const double inv_n = 1.0 / static_cast<double>(n);
  LoocvResult result;
  double total = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto band = x.band(i);
    const auto off = static_cast<Eigen::Index>(x.offset(i));
    double h = 0.0;
    for (std::size_t a = 0; a < w; ++a) {
      if (band[a] == 0.0) continue;
      for (std::size_t b = 0; b < w; ++b) {
        h += band[a] * inv(off + static_cast<Eigen::Index>(a), off + static_cast<Eigen::Index>(b)) * band[b];
      }
    }
    h *= inv_n;
    const double denom = 1.0 - h;
    if (denom <= 1e-10) {
      ++result.dropped;
      continue;
    }
    const double r = (y[i] - x.row_dot(i, beta)) / denom;
    total += r * r;
    ++kept;
  }
  if (kept == 0) throw std::domain_error("LOOCV undefined: every sample has leverage 1");
  result.score = total / static_cast<double>(kept);
  return result;
}

double loocv_score(const RegressionProblem& problem) {
  return loocv(problem.design, as_span(problem.response), problem.lambda).score;
}

}  // namespace sieveope::regress
