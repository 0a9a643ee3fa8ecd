#include "sieveope/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sieveope::basis {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> clamped_knots(double lo, double hi, const std::vector<double>& interior,
                                  int degree) {
  std::vector<double> knots;
  knots.reserve(interior.size() + 2 * static_cast<std::size_t>(degree + 1));
  knots.insert(knots.end(), static_cast<std::size_t>(degree + 1), lo);
  knots.insert(knots.end(), interior.begin(), interior.end());
  knots.insert(knots.end(), static_cast<std::size_t>(degree + 1), hi);
  return knots;
}

}  // namespace

std::vector<double> build_knots(std::span<const double> samples, int k, int degree) {
  if (degree < 0) throw std::invalid_argument("build_knots: negative degree");
  if (k < degree + 1) {
    throw std::invalid_argument("build_knots: K = " + std::to_string(k) +
                                " is too small for degree " + std::to_string(degree));
  }
  if (samples.empty()) throw std::invalid_argument("build_knots: no samples");

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front();
  const double hi = sorted.back();
  const double eps = 1e-9 * (hi - lo + 1.0);

  const int m = k - degree - 1;
  std::vector<double> interior(static_cast<std::size_t>(m));
  for (int j = 1; j <= m; ++j) {
    interior[static_cast<std::size_t>(j - 1)] =
        quantile_sorted(sorted, static_cast<double>(j) / static_cast<double>(m + 1));
  }
  // Tied quantiles: push each repeat just past its predecessor.
  for (std::size_t j = 1; j < interior.size(); ++j) {
    if (interior[j] <= interior[j - 1]) interior[j] = interior[j - 1] + 1e-12;
  }
  return clamped_knots(lo - eps, hi + eps, interior, degree);
}

BSplineBasis::BSplineBasis(std::vector<double> knots, int degree)
    : knots_(std::move(knots)), degree_(degree) {
  const auto p = static_cast<std::size_t>(degree_);
  if (degree_ < 0 || knots_.size() < 2 * (p + 1)) {
    throw std::invalid_argument("BSplineBasis: knot vector too short for degree");
  }
  if (!std::is_sorted(knots_.begin(), knots_.end())) {
    throw std::invalid_argument("BSplineBasis: knots must be nondecreasing");
  }
  for (std::size_t j = 1; j <= p; ++j) {
    if (knots_[j] != knots_[0] || knots_[knots_.size() - 1 - j] != knots_.back()) {
      throw std::invalid_argument("BSplineBasis: knot vector must be clamped");
    }
  }
  if (!(lower() < upper())) throw std::invalid_argument("BSplineBasis: empty span");
}

BSplineBasis BSplineBasis::uniform(double lo, double hi, int k, int degree) {
  if (k < degree + 1) throw std::invalid_argument("BSplineBasis::uniform: K too small");
  const int m = k - degree - 1;
  std::vector<double> interior(static_cast<std::size_t>(m));
  for (int j = 1; j <= m; ++j) {
    interior[static_cast<std::size_t>(j - 1)] = lo + (hi - lo) * j / (m + 1);
  }
  return BSplineBasis(clamped_knots(lo, hi, interior, degree), degree);
}

int BSplineBasis::evaluate_local(double x, std::span<double> out) const {
  const int p = degree_;
  const int n_basis = size();
  x = std::clamp(x, lower(), upper());

  int span;
  if (x >= upper()) {
    span = n_basis - 1;
  } else {
    const auto first = knots_.begin() + p;
    const auto last = knots_.begin() + n_basis + 1;
    span = static_cast<int>(std::upper_bound(first, last, x) - knots_.begin()) - 1;
  }

  // Cox-de Boor triangle for the p+1 functions supported on [t_span, t_span+1).
  double left[32];
  double right[32];
  if (p >= 32) throw std::invalid_argument("BSplineBasis: degree too large");
  out[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - knots_[static_cast<std::size_t>(span + 1 - j)];
    right[j] = knots_[static_cast<std::size_t>(span + j)] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[static_cast<std::size_t>(r)] / (right[r + 1] + left[j - r]);
      out[static_cast<std::size_t>(r)] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[static_cast<std::size_t>(j)] = saved;
  }
  return span - p;
}

std::vector<double> BSplineBasis::evaluate(double x) const {
  std::vector<double> local(static_cast<std::size_t>(degree_ + 1));
  const int first = evaluate_local(x, local);
  std::vector<double> all(static_cast<std::size_t>(size()), 0.0);
  std::copy(local.begin(), local.end(), all.begin() + first);
  return all;
}

SplineCurve::SplineCurve(BSplineBasis basis, std::vector<double> coefficients)
    : basis_(std::move(basis)), coefficients_(std::move(coefficients)) {
  if (static_cast<int>(coefficients_.size()) != basis_.size()) {
    throw std::invalid_argument("SplineCurve: coefficient count must equal basis size");
  }
}

double SplineCurve::operator()(double x) const {
  double local[32];
  const int width = basis_.degree() + 1;
  const int first = basis_.evaluate_local(x, std::span<double>(local, static_cast<std::size_t>(width)));
  double value = 0.0;
  for (int j = 0; j < width; ++j) value += local[j] * coefficients_[static_cast<std::size_t>(first + j)];
  return value;
}

FeatureSystem::FeatureSystem(Kind kind, int action_count)
    : kind_(std::move(kind)), action_count_(action_count) {
  if (action_count_ < 1) throw std::invalid_argument("FeatureSystem: action count must be >= 1");
  if (const auto* ind = std::get_if<IndicatorBasis>(&kind_); ind && ind->states < 1) {
    throw std::invalid_argument("FeatureSystem: indicator basis needs at least one state");
  }
}

FeatureSystem FeatureSystem::spline(std::span<const double> samples, int k, int degree,
                                    int action_count) {
  return FeatureSystem(BSplineBasis(build_knots(samples, k, degree), degree), action_count);
}

FeatureSystem FeatureSystem::indicator(int states, int action_count) {
  return FeatureSystem(IndicatorBasis{states}, action_count);
}

int FeatureSystem::k() const {
  if (const auto* b = std::get_if<BSplineBasis>(&kind_)) return b->size();
  return std::get<IndicatorBasis>(kind_).states;
}

std::size_t FeatureSystem::support_width() const {
  if (const auto* b = std::get_if<BSplineBasis>(&kind_)) {
    return static_cast<std::size_t>(b->degree() + 1);
  }
  return 1;
}

std::vector<double> FeatureSystem::knots() const {
  if (const auto* b = std::get_if<BSplineBasis>(&kind_)) return b->knots();
  return {};
}

int FeatureSystem::state_band(double s, std::span<double> out) const {
  if (const auto* b = std::get_if<BSplineBasis>(&kind_)) return b->evaluate_local(s, out);
  const int states = std::get<IndicatorBasis>(kind_).states;
  const auto index = static_cast<long>(std::lround(s));
  if (index < 0 || index >= states || std::abs(s - static_cast<double>(index)) > 1e-9) {
    throw std::out_of_range("FeatureSystem: state " + std::to_string(s) +
                            " is not in the indicator state set");
  }
  out[0] = 1.0;
  return static_cast<int>(index);
}

std::vector<double> FeatureSystem::eval_state_basis(double s) const {
  std::vector<double> band(support_width());
  const int first = state_band(s, band);
  std::vector<double> all(static_cast<std::size_t>(k()), 0.0);
  std::copy(band.begin(), band.end(), all.begin() + first);
  return all;
}

void FeatureSystem::check_action(int action) const {
  if (action < 0 || action >= action_count_) {
    throw std::out_of_range("FeatureSystem: action index " + std::to_string(action) +
                            " outside [0, " + std::to_string(action_count_) + ")");
  }
}

std::vector<double> FeatureSystem::feature_map(double s, int action) const {
  check_action(action);
  const auto psi = eval_state_basis(s);
  std::vector<double> phi(dimension(), 0.0);
  std::copy(psi.begin(), psi.end(), phi.begin() + static_cast<long>(action) * k());
  return phi;
}

void FeatureSystem::append_row(Design& design, double s, int action) const {
  check_action(action);
  double local[32];
  const std::size_t width = support_width();
  const int first = state_band(s, std::span<double>(local, width));
  auto row = design.append_row(static_cast<std::size_t>(action) * static_cast<std::size_t>(k()) +
                               static_cast<std::size_t>(first));
  std::copy(local, local + width, row.begin());
}

Design FeatureSystem::design(std::span<const double> states, std::span<const int> actions) const {
  if (states.size() != actions.size()) {
    throw std::invalid_argument("FeatureSystem::design: states and actions differ in length");
  }
  Design d = empty_design();
  d.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) append_row(d, states[i], actions[i]);
  return d;
}

double FeatureSystem::dot(double s, int action, const Eigen::VectorXd& beta) const {
  check_action(action);
  double local[32];
  const std::size_t width = support_width();
  const int first = state_band(s, std::span<double>(local, width));
  const auto base = static_cast<Eigen::Index>(action) * k() + first;
  double acc = 0.0;
  for (std::size_t j = 0; j < width; ++j) acc += local[j] * beta[base + static_cast<Eigen::Index>(j)];
  return acc;
}

}  // namespace sieveope::basis
