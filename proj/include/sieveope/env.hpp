#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sieveope/basis.hpp"
#include "sieveope/rng.hpp"

namespace sieveope::env {

struct UniformInitial {
  double lo;
  double hi;
};

struct PmfInitial {
  std::vector<double> pmf;
};

using InitialDistribution = std::variant<UniformInitial, PmfInitial>;

/// S' = (2A - 1) f(S), R = 2 S'.
struct PaperDynamics {
  basis::SplineCurve f;
};

/// Time-homogeneous finite MDP. transition and reward are indexed [s][a][s'].
struct TabularDynamics {
  int states;
  int actions;
  std::vector<double> transition;
  std::vector<double> reward;

  std::size_t index(int s, int a, int next) const {
    return (static_cast<std::size_t>(s) * static_cast<std::size_t>(actions) +
            static_cast<std::size_t>(a)) * static_cast<std::size_t>(states) +
           static_cast<std::size_t>(next);
  }
  double p(int s, int a, int next) const { return transition[index(s, a, next)]; }
  double r(int s, int a, int next) const { return reward[index(s, a, next)]; }
};

using Dynamics = std::variant<PaperDynamics, TabularDynamics>;

/// Finite-horizon episodic MDP. Immutable after construction.
class EnvSpec {
 public:
  EnvSpec(int horizon, int action_count, Dynamics dynamics, InitialDistribution initial);

  int horizon() const { return horizon_; }
  int action_count() const { return action_count_; }
  const Dynamics& dynamics() const { return dynamics_; }
  const InitialDistribution& initial() const { return initial_; }

  bool is_tabular() const { return std::holds_alternative<TabularDynamics>(dynamics_); }
  const TabularDynamics& tabular() const;
  const PaperDynamics& paper() const;
  int state_count() const { return tabular().states; }

  /// Transition function f of the `paper` preset.
  double transition_function(double s) const { return paper().f(s); }

  /// Closed state domain: [-2, 2] for the `paper` preset, [0, states-1] for tabular.
  std::pair<double, double> state_domain() const;

  /// Same dynamics with a different horizon.
  EnvSpec with_horizon(int horizon) const;

  double sample_initial(Rng& rng) const;

  /// Returns (next state, reward).
  std::pair<double, double> step(double s, int action, Rng& rng) const;

 private:
  int horizon_;
  int action_count_;
  Dynamics dynamics_;
  InitialDistribution initial_;
};

/// Coefficients of the shipped f: a clamped cubic B-spline with 8 basis
/// functions on evenly spaced knots over [-2, 2].
std::vector<double> default_f_coefficients();

/// The 1-D simulation environment. Rejects coefficient vectors whose spline
/// leaves [-2, 2] on a 10,001-point grid, and horizons below 1.
EnvSpec make_paper_env(std::span<const double> f_coefficients, int horizon);
EnvSpec make_paper_env(int horizon);

/// Finite MDP from [s][a][s'] transition probabilities and rewards.
EnvSpec make_tabular_env(const std::vector<std::vector<std::vector<double>>>& transition,
                         const std::vector<std::vector<std::vector<double>>>& reward,
                         std::vector<double> initial_pmf, int horizon);

/// Same with rewards depending only on (s, a).
EnvSpec make_tabular_env(const std::vector<std::vector<std::vector<double>>>& transition,
                         const std::vector<std::vector<double>>& reward,
                         std::vector<double> initial_pmf, int horizon);

/// Time-indexed stochastic policy. Steps are 1-based.
class PolicySpec {
 public:
  using Rule = std::function<void(int step, double state, std::span<double> probs)>;

  PolicySpec(std::string name, int action_count, Rule rule,
             std::vector<double> breakpoints = {});

  const std::string& name() const { return name_; }
  int action_count() const { return action_count_; }

  /// State values where the rule is discontinuous (used to split quadrature).
  const std::vector<double>& breakpoints() const { return breakpoints_; }

  void probabilities(int step, double state, std::span<double> out) const;
  std::vector<double> probabilities(int step, double state) const;

  int sample(int step, double state, Rng& rng) const;

 private:
  std::string name_;
  int action_count_;
  Rule rule_;
  std::vector<double> breakpoints_;
};

/// Uniform over actions: the Bernoulli(1/2) behavior policy when |A| = 2.
PolicySpec uniform_policy(int action_count, std::string name = "behavior");

/// Named policies on the `paper` preset: "behavior", "a", "b", "c".
/// a: P(A=1) = 1/2.  b: P(A=1) = logistic(f(s)).  c: P(A=1) = 1{f(s) > 0}.
PolicySpec paper_policy(const std::string& name, const EnvSpec& env);

/// Stationary tabular policy, table[s][a].
PolicySpec tabular_policy(std::vector<std::vector<double>> table, std::string name = "tabular");

/// Time-varying tabular policy, table[t-1][s][a].
PolicySpec tabular_policy(std::vector<std::vector<std::vector<double>>> table,
                          std::string name = "tabular");

/// n episodes over horizon T. Step-major storage; steps are 1-based.
class TrajectoryBatch {
 public:
  TrajectoryBatch(std::size_t episodes, int horizon);

  std::size_t episodes() const { return episodes_; }
  int horizon() const { return horizon_; }

  /// S_{i,t}, t in [1, T+1].
  double state(std::size_t i, int t) const { return states_[idx(t, horizon_ + 1)][i]; }
  int action(std::size_t i, int t) const { return actions_[idx(t, horizon_)][i]; }
  double reward(std::size_t i, int t) const { return rewards_[idx(t, horizon_)][i]; }

  std::span<const double> step_states(int t) const { return states_[idx(t, horizon_ + 1)]; }
  std::span<const int> step_actions(int t) const { return actions_[idx(t, horizon_)]; }
  std::span<const double> step_rewards(int t) const { return rewards_[idx(t, horizon_)]; }

  void set_state(std::size_t i, int t, double s) { states_[idx(t, horizon_ + 1)][i] = s; }
  void set_action(std::size_t i, int t, int a) { actions_[idx(t, horizon_)][i] = a; }
  void set_reward(std::size_t i, int t, double r) { rewards_[idx(t, horizon_)][i] = r; }

  bool operator==(const TrajectoryBatch&) const = default;

  /// CSV `episode,t,state,action,reward`. Each episode also carries a row
  /// t = T+1 with S_{T+1} and empty action/reward fields.
  void write_csv(std::ostream& out) const;
  static TrajectoryBatch read_csv(std::istream& in);

 private:
  std::size_t idx(int t, int limit) const;

  std::size_t episodes_;
  int horizon_;
  std::vector<std::vector<double>> states_;
  std::vector<std::vector<int>> actions_;
  std::vector<std::vector<double>> rewards_;
};

/// n i.i.d. episodes of env under policy. Pure function of its arguments.
TrajectoryBatch simulate(const EnvSpec& env, const PolicySpec& policy, std::size_t n,
                         std::uint64_t seed);

}  // namespace sieveope::env
