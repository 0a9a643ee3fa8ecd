#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "sieveope/design.hpp"

namespace sieveope::basis {

/// Clamped knot vector for a K-function spline basis of the given degree.
/// Interior knots sit at the j/(m+1) sample quantiles (m = K - degree - 1,
/// linear interpolation between order statistics); boundary knots are the
/// sample range widened by 1e-9 * (max - min + 1) and repeated degree+1 times.
std::vector<double> build_knots(std::span<const double> samples, int k, int degree);

/// Clamped B-spline basis on a fixed knot vector.
class BSplineBasis {
 public:
  BSplineBasis(std::vector<double> knots, int degree);

  /// Clamped basis with evenly spaced interior knots on [lo, hi].
  static BSplineBasis uniform(double lo, double hi, int k, int degree);

  int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  int degree() const { return degree_; }
  const std::vector<double>& knots() const { return knots_; }
  double lower() const { return knots_[static_cast<std::size_t>(degree_)]; }
  double upper() const { return knots_[knots_.size() - 1 - static_cast<std::size_t>(degree_)]; }

  /// Writes the degree+1 basis values that can be nonzero at x into `out`
  /// and returns the index of the first one. x is clamped to [lower, upper].
  int evaluate_local(double x, std::span<double> out) const;

  /// All K basis values at x.
  std::vector<double> evaluate(double x) const;

 private:
  std::vector<double> knots_;
  int degree_;
};

/// A scalar spline s -> sum_k c_k psi_k(s).
class SplineCurve {
 public:
  SplineCurve(BSplineBasis basis, std::vector<double> coefficients);

  double operator()(double x) const;
  const BSplineBasis& basis() const { return basis_; }
  const std::vector<double>& coefficients() const { return coefficients_; }

 private:
  BSplineBasis basis_;
  std::vector<double> coefficients_;
};

/// One-hot basis over a finite state set {0, ..., states-1}.
struct IndicatorBasis {
  int states;
};

/// Per-step state basis Psi_K plus the action-blocked map phi_K(s, a) of
/// dimension K * |A|: Psi_K(s) occupies block a, all other blocks are zero.
class FeatureSystem {
 public:
  using Kind = std::variant<BSplineBasis, IndicatorBasis>;

  FeatureSystem(Kind kind, int action_count);

  static FeatureSystem spline(std::span<const double> samples, int k, int degree,
                              int action_count);
  static FeatureSystem indicator(int states, int action_count);

  const Kind& kind() const { return kind_; }
  bool is_spline() const { return std::holds_alternative<BSplineBasis>(kind_); }
  int k() const;
  int action_count() const { return action_count_; }
  std::size_t dimension() const {
    return static_cast<std::size_t>(k()) * static_cast<std::size_t>(action_count_);
  }
  /// Number of consecutive state-basis entries that can be nonzero at once.
  std::size_t support_width() const;

  /// Knot vector for spline systems, empty for indicator systems.
  std::vector<double> knots() const;

  /// Psi_K(s) into a band of support_width(); returns the first state-basis index.
  int state_band(double s, std::span<double> out) const;

  std::vector<double> eval_state_basis(double s) const;
  std::vector<double> feature_map(double s, int action) const;

  /// Appends phi_K(s, a) as one row of `design`.
  void append_row(Design& design, double s, int action) const;

  /// Design with rows phi_K(states[i], actions[i]).
  Design design(std::span<const double> states, std::span<const int> actions) const;

  /// Empty design with this system's column count and band width.
  Design empty_design() const { return Design(dimension(), support_width()); }

  /// phi_K(s, a)^T beta
  double dot(double s, int action, const Eigen::VectorXd& beta) const;

 private:
  void check_action(int action) const;

  Kind kind_;
  int action_count_;
};

}  // namespace sieveope::basis
