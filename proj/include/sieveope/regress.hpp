#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "sieveope/design.hpp"

namespace sieveope::regress {

/// The regularized Gram matrix could not be factorized. `step` is the
/// backward-pass step that produced it, or 0 when not known.
class SingularMatrixError : public std::runtime_error {
 public:
  explicit SingularMatrixError(const std::string& what, int step = 0)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Ridge level per regression. TraceScaled resolves to value * trace(G) / D
/// for Gram matrix G of dimension D.
struct LambdaRule {
  enum class Kind { Fixed, TraceScaled };
  Kind kind = Kind::TraceScaled;
  double value = 1e-8;

  static LambdaRule fixed(double lambda) { return {Kind::Fixed, lambda}; }
  static LambdaRule trace_scaled(double scale = 1e-8) { return {Kind::TraceScaled, scale}; }

  double resolve(const Eigen::MatrixXd& gram) const;
};

/// X^T X / n.
Eigen::MatrixXd gram(const Design& x);

/// X^T y / n.
Eigen::VectorXd cross(const Design& x, std::span<const double> y);

/// Cholesky factor of gram + lambda * I.
class RegularizedGram {
 public:
  RegularizedGram(const Eigen::MatrixXd& gram, double lambda);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }
  Eigen::MatrixXd inverse() const;
  std::size_t dimension() const { return static_cast<std::size_t>(llt_.rows()); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

struct RegressionProblem {
  Design design;
  Eigen::VectorXd response;
  double lambda = 0.0;
};

/// beta solving (X^T X + n lambda I) beta = X^T y.
Eigen::VectorXd solve(const Design& x, std::span<const double> y, double lambda);
Eigen::VectorXd solve(const RegressionProblem& problem);

struct LoocvResult {
  double score = 0.0;
  /// Samples with leverage h_ii numerically equal to 1, left out of the mean.
  std::size_t dropped = 0;
};

/// Exact leave-one-out mean squared error of the ridge smoother,
/// mean_i ((y_i - yhat_i) / (1 - h_ii))^2, where each left-out refit keeps
/// the penalty n * lambda * I. Throws std::domain_error when every h_ii = 1.
LoocvResult loocv(const Design& x, std::span<const double> y, double lambda);
double loocv_score(const RegressionProblem& problem);

}  // namespace sieveope::regress
