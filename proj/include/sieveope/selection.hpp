#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sieveope/basis.hpp"
#include "sieveope/fqe.hpp"
#include "sieveope/regress.hpp"

namespace sieveope::selection {

struct FixedK {
  int k;
};

/// K = round(c * n^exponent), clamped below at degree + 1.
struct RuleOfThumbK {
  double c = 3.0;
  double exponent = 0.2;
};

/// Per-step leave-one-out selection. Empty candidates means the default grid.
struct LoocvK {
  std::vector<int> candidates;
};

using KRule = std::variant<FixedK, RuleOfThumbK, LoocvK>;

/// Short label for records: "fixed:10", "rot:3", "loocv".
std::string label(const KRule& rule);

/// Parses "10", "rot:3", "rot:3:0.2" or "loocv".
KRule parse_k_rule(const std::string& text);

/// Fixed and rule-of-thumb rules; LOOCV rules are resolved per step instead.
int resolve_k(const KRule& rule, std::size_t n, int degree = 3);

/// {4, 6, 8, 11, 14, 18, 23, 30} restricted to [degree + 1, n / 10]; falls
/// back to {degree + 1} when the restriction is empty.
std::vector<int> default_candidates(std::size_t n, int degree = 3);

struct LoocvChoice {
  int k;
  std::vector<double> scores;  // one per candidate; NaN where LOOCV failed
};

/// Fits every candidate K (knots from `states`) against `targets` and
/// returns the smallest LOOCV score; ties go to the smaller K.
LoocvChoice select_k_loocv(std::span<const double> states, std::span<const int> actions,
                           std::span<const double> targets, std::span<const int> candidates,
                           int action_count, const regress::LambdaRule& lambda, int degree = 3);

/// Feature selector for fqe::fit that applies `rule` at every step and
/// remembers the K it chose.
class SplineSelector {
 public:
  SplineSelector(KRule rule, int action_count, regress::LambdaRule lambda, int degree = 3);

  basis::FeatureSystem operator()(int t, std::span<const double> states, std::span<const int> actions,
                                  std::span<const double> targets);

  /// K used per step, indexed t - 1.
  std::vector<int> chosen() const;
  double mean_k() const;

 private:
  KRule rule_;
  int action_count_;
  regress::LambdaRule lambda_;
  int degree_;
  std::vector<int> chosen_;
};

/// Adapts a SplineSelector (held by reference) to fqe::FeatureSelector.
fqe::FeatureSelector as_feature_selector(SplineSelector& selector);

}  // namespace sieveope::selection
