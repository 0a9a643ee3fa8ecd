#include "sieveope/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sieveope/csv.hpp"

namespace sieveope::selection {

std::string label(const KRule& rule) {
  if (const auto* f = std::get_if<FixedK>(&rule)) return "fixed:" + std::to_string(f->k);
  if (const auto* r = std::get_if<RuleOfThumbK>(&rule)) {
    std::string s = "rot:" + csv::format_double(r->c);
    if (r->exponent != 0.2) s += ":" + csv::format_double(r->exponent);
    return s;
  }
  return "loocv";
}

KRule parse_k_rule(const std::string& text) {
  if (text == "loocv") return LoocvK{};
  if (text.rfind("rot:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(text.substr(4));
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    RuleOfThumbK r;
    try {
      r.c = csv::parse_double(parts.at(0));
      if (parts.size() > 1) r.exponent = csv::parse_double(parts[1]);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad K rule '" + text + "' (expected rot:c or rot:c:exponent)");
    }
    if (parts.size() > 2 || !(r.c > 0.0) || !(r.exponent > 0.0)) {
      throw std::invalid_argument("bad K rule '" + text + "'");
    }
    return r;
  }
  const std::string digits = text.rfind("fixed:", 0) == 0 ? text.substr(6) : text;
  long long k = 0;
  try {
    k = csv::parse_int(digits);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad K rule '" + text + "' (expected an integer, rot:c or loocv)");
  }
  if (k < 1 || k > 100000) throw std::invalid_argument("bad K rule '" + text + "' (K out of range)");
  return FixedK{static_cast<int>(k)};
}

int resolve_k(const KRule& rule, std::size_t n, int degree) {
  if (n < 1) throw std::invalid_argument("resolve_k: n must be >= 1");
  if (const auto* f = std::get_if<FixedK>(&rule)) {
    if (f->k < degree + 1) throw std::invalid_argument("resolve_k: fixed K below degree + 1");
    return f->k;
  }
  if (const auto* r = std::get_if<RuleOfThumbK>(&rule)) {
    const double k = std::round(r->c * std::pow(static_cast<double>(n), r->exponent));
    return std::max(static_cast<int>(k), degree + 1);
  }
  throw std::invalid_argument("resolve_k: LOOCV rules are resolved per step");
}

std::vector<int> default_candidates(std::size_t n, int degree) {
  static constexpr int kGrid[] = {4, 6, 8, 11, 14, 18, 23, 30};
  std::vector<int> out;
  for (const int k : kGrid) {
    if (k >= degree + 1 && static_cast<std::size_t>(k) * 10 <= n) out.push_back(k);
  }
  if (out.empty()) out.push_back(degree + 1);
  return out;
}

LoocvChoice select_k_loocv(std::span<const double> states, std::span<const int> actions,
                           std::span<const double> targets, std::span<const int> candidates,
                           int action_count, const regress::LambdaRule& lambda, int degree) {
  if (candidates.empty()) throw std::invalid_argument("select_k_loocv: no candidates");
  std::vector<int> order(candidates.begin(), candidates.end());
  std::sort(order.begin(), order.end());

  LoocvChoice choice{0, std::vector<double>(candidates.size(), std::numeric_limits<double>::quiet_NaN())};
  double best = std::numeric_limits<double>::infinity();
  for (const int k : order) {
    double score;
    try {
      const auto fs = basis::FeatureSystem::spline(states, k, degree, action_count);
      const Design x = fs.design(states, actions);
      score = regress::loocv(x, targets, lambda.resolve(regress::gram(x))).score;
    } catch (const regress::SingularMatrixError&) {
      continue;
    } catch (const std::domain_error&) {
      continue;
    }
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      if (candidates[j] == k) choice.scores[j] = score;
    }
    if (score < best) {
      best = score;
      choice.k = k;
    }
  }
  if (choice.k == 0) throw std::runtime_error("select_k_loocv: LOOCV undefined for every candidate");
  return choice;
}

SplineSelector::SplineSelector(KRule rule, int action_count, regress::LambdaRule lambda, int degree)
    : rule_(std::move(rule)), action_count_(action_count), lambda_(lambda), degree_(degree) {}

basis::FeatureSystem SplineSelector::operator()(int t, std::span<const double> states,
                                                std::span<const int> actions,
                                                std::span<const double> targets) {
  int k;
  if (const auto* cv = std::get_if<LoocvK>(&rule_)) {
    const auto candidates = cv->candidates.empty() ? default_candidates(states.size(), degree_) : cv->candidates;
    k = select_k_loocv(states, actions, targets, candidates, action_count_, lambda_, degree_).k;
  } else {
    k = resolve_k(rule_, states.size(), degree_);
  }
  if (chosen_.size() < static_cast<std::size_t>(t)) chosen_.resize(static_cast<std::size_t>(t), 0);
  chosen_[static_cast<std::size_t>(t - 1)] = k;
  return basis::FeatureSystem::spline(states, k, degree_, action_count_);
}

std::vector<int> SplineSelector::chosen() const { return chosen_; }

double SplineSelector::mean_k() const {
  if (chosen_.empty()) return 0.0;
  return std::accumulate(chosen_.begin(), chosen_.end(), 0.0) / static_cast<double>(chosen_.size());
}

fqe::FeatureSelector as_feature_selector(SplineSelector& selector) {
  return [&selector](int t, std::span<const double> s, std::span<const int> a, std::span<const double> y) {
    return selector(t, s, a, y);
  };
}

}  // namespace sieveope::selection
