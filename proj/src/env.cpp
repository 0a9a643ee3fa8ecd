#include "sieveope/env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "sieveope/csv.hpp"

namespace sieveope::env {

namespace {

constexpr double kDomainLo = -2.0;
constexpr double kDomainHi = 2.0;
constexpr int kSupGridPoints = 10001;

void check_pmf(std::span<const double> p, const std::string& what) {
  double sum = 0.0;
  for (const double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument(what + ": negative or non-finite entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument(what + ": entries sum to " + std::to_string(sum) + ", not 1");
  }
}

int sample_categorical(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t a = 0; a + 1 < probs.size(); ++a) {
    acc += probs[a];
    if (u < acc) return static_cast<int>(a);
  }
  // Last action absorbs rounding; skip trailing zero-mass actions.
  for (std::size_t a = probs.size(); a-- > 0;) {
    if (probs[a] > 0.0) return static_cast<int>(a);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Sign changes of f on a dense grid, refined by bisection.
std::vector<double> positivity_boundaries(const basis::SplineCurve& f) {
  std::vector<double> roots;
  constexpr int kGrid = 4000;
  const double h = (kDomainHi - kDomainLo) / kGrid;
  double prev_x = kDomainLo;
  bool prev_pos = f(prev_x) > 0.0;
  for (int j = 1; j <= kGrid; ++j) {
    const double x = kDomainLo + j * h;
    const bool pos = f(x) > 0.0;
    if (pos != prev_pos) {
      double lo = prev_x;
      double hi = x;
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((f(mid) > 0.0) == prev_pos) lo = mid; else hi = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_x = x;
    prev_pos = pos;
  }
  return roots;
}

}  // namespace

EnvSpec::EnvSpec(int horizon, int action_count, Dynamics dynamics, InitialDistribution initial)
    : horizon_(horizon),
      action_count_(action_count),
      dynamics_(std::move(dynamics)),
      initial_(std::move(initial)) {
  if (horizon_ < 1) throw std::invalid_argument("EnvSpec: horizon must be >= 1");
  if (action_count_ < 1) throw std::invalid_argument("EnvSpec: action count must be >= 1");
}

const TabularDynamics& EnvSpec::tabular() const {
  if (const auto* t = std::get_if<TabularDynamics>(&dynamics_)) return *t;
  throw std::logic_error("EnvSpec: not a tabular environment");
}

const PaperDynamics& EnvSpec::paper() const {
  if (const auto* p = std::get_if<PaperDynamics>(&dynamics_)) return *p;
  throw std::logic_error("EnvSpec: not the paper preset");
}

std::pair<double, double> EnvSpec::state_domain() const {
  if (is_tabular()) return {0.0, static_cast<double>(tabular().states - 1)};
  return {kDomainLo, kDomainHi};
}

EnvSpec EnvSpec::with_horizon(int horizon) const {
  return EnvSpec(horizon, action_count_, dynamics_, initial_);
}

double EnvSpec::sample_initial(Rng& rng) const {
  const double u = uniform01(rng);
  if (const auto* uni = std::get_if<UniformInitial>(&initial_)) return uni->lo + (uni->hi - uni->lo) * u;
  const auto& pmf = std::get<PmfInitial>(initial_).pmf;
  return static_cast<double>(sample_categorical(pmf, u));
}

std::pair<double, double> EnvSpec::step(double s, int action, Rng& rng) const {
  if (const auto* p = std::get_if<PaperDynamics>(&dynamics_)) {
    const double next = (2.0 * action - 1.0) * p->f(s);
    return {next, 2.0 * next};
  }
  const auto& tab = std::get<TabularDynamics>(dynamics_);
  const int si = static_cast<int>(std::lround(s));
  const std::span<const double> row(tab.transition.data() + tab.index(si, action, 0),
                                    static_cast<std::size_t>(tab.states));
  const int next = sample_categorical(row, uniform01(rng));
  return {static_cast<double>(next), tab.r(si, action, next)};
}

std::vector<double> default_f_coefficients() {
  return {-1.5, -1.9, -0.4, 1.2, 1.8, 0.5, -0.9, -1.6};
}

EnvSpec make_paper_env(std::span<const double> f_coefficients, int horizon) {
  if (horizon < 1) throw std::invalid_argument("make_paper_env: horizon must be >= 1");
  const int k = static_cast<int>(f_coefficients.size());
  if (k < 4) throw std::invalid_argument("make_paper_env: need at least 4 cubic coefficients");
  basis::SplineCurve f(basis::BSplineBasis::uniform(kDomainLo, kDomainHi, k, 3),
                       std::vector<double>(f_coefficients.begin(), f_coefficients.end()));
  for (int j = 0; j < kSupGridPoints; ++j) {
    const double s = kDomainLo + (kDomainHi - kDomainLo) * j / (kSupGridPoints - 1);
    const double v = f(s);
    if (!(std::abs(v) <= 2.0)) {
      throw std::invalid_argument("make_paper_env: |f(" + std::to_string(s) + ")| = " +
                                  std::to_string(std::abs(v)) + " exceeds 2");
    }
  }
  return EnvSpec(horizon, 2, PaperDynamics{std::move(f)}, UniformInitial{kDomainLo, kDomainHi});
}

EnvSpec make_paper_env(int horizon) {
  const auto c = default_f_coefficients();
  return make_paper_env(c, horizon);
}

EnvSpec make_tabular_env(const std::vector<std::vector<std::vector<double>>>& transition,
                         const std::vector<std::vector<std::vector<double>>>& reward,
                         std::vector<double> initial_pmf, int horizon) {
  const int states = static_cast<int>(transition.size());
  if (states < 1) throw std::invalid_argument("make_tabular_env: no states");
  const int actions = static_cast<int>(transition.front().size());
  if (actions < 1) throw std::invalid_argument("make_tabular_env: no actions");
  if (static_cast<int>(reward.size()) != states || static_cast<int>(initial_pmf.size()) != states) {
    throw std::invalid_argument("make_tabular_env: reward/initial sizes disagree with state count");
  }
  check_pmf(initial_pmf, "make_tabular_env: initial distribution");

  TabularDynamics tab{states, actions, {}, {}};
  tab.transition.resize(static_cast<std::size_t>(states * actions * states));
  tab.reward.resize(tab.transition.size());
  for (int s = 0; s < states; ++s) {
    if (static_cast<int>(transition[s].size()) != actions || static_cast<int>(reward[s].size()) != actions) {
      throw std::invalid_argument("make_tabular_env: ragged action dimension");
    }
    for (int a = 0; a < actions; ++a) {
      const auto& row = transition[s][a];
      const auto& rrow = reward[s][a];
      if (static_cast<int>(row.size()) != states || static_cast<int>(rrow.size()) != states) {
        throw std::invalid_argument("make_tabular_env: ragged next-state dimension");
      }
      check_pmf(row, "make_tabular_env: transition row (" + std::to_string(s) + "," +
                         std::to_string(a) + ")");
      for (int next = 0; next < states; ++next) {
        if (!std::isfinite(rrow[next])) throw std::invalid_argument("make_tabular_env: non-finite reward");
        tab.transition[tab.index(s, a, next)] = row[next];
        tab.reward[tab.index(s, a, next)] = rrow[next];
      }
    }
  }
  return EnvSpec(horizon, actions, std::move(tab), PmfInitial{std::move(initial_pmf)});
}

EnvSpec make_tabular_env(const std::vector<std::vector<std::vector<double>>>& transition,
                         const std::vector<std::vector<double>>& reward,
                         std::vector<double> initial_pmf, int horizon) {
  std::vector<std::vector<std::vector<double>>> full(reward.size());
  for (std::size_t s = 0; s < reward.size(); ++s) {
    for (const double r : reward[s]) full[s].emplace_back(transition.size(), r);
  }
  return make_tabular_env(transition, full, std::move(initial_pmf), horizon);
}

PolicySpec::PolicySpec(std::string name, int action_count, Rule rule,
                       std::vector<double> breakpoints)
    : name_(std::move(name)),
      action_count_(action_count),
      rule_(std::move(rule)),
      breakpoints_(std::move(breakpoints)) {
  if (action_count_ < 1) throw std::invalid_argument("PolicySpec: action count must be >= 1");
}

void PolicySpec::probabilities(int step, double state, std::span<double> out) const {
  rule_(step, state, out);
}

std::vector<double> PolicySpec::probabilities(int step, double state) const {
  std::vector<double> p(static_cast<std::size_t>(action_count_));
  rule_(step, state, p);
  return p;
}

int PolicySpec::sample(int step, double state, Rng& rng) const {
  double buf[16];
  std::vector<double> heap;
  std::span<double> probs;
  if (action_count_ <= 16) {
    probs = std::span<double>(buf, static_cast<std::size_t>(action_count_));
  } else {
    heap.resize(static_cast<std::size_t>(action_count_));
    probs = heap;
  }
  rule_(step, state, probs);
  return sample_categorical(probs, uniform01(rng));
}

PolicySpec uniform_policy(int action_count, std::string name) {
  const double p = 1.0 / action_count;
  return PolicySpec(std::move(name), action_count,
                    [p](int, double, std::span<double> out) { std::fill(out.begin(), out.end(), p); });
}

PolicySpec paper_policy(const std::string& name, const EnvSpec& env) {
  if (name == "behavior" || name == "a") return uniform_policy(2, name);
  const auto& f = env.paper().f;
  if (name == "b") {
    return PolicySpec("b", 2, [f](int, double s, std::span<double> out) {
      const double p1 = 1.0 / (1.0 + std::exp(-f(s)));
      out[0] = 1.0 - p1;
      out[1] = p1;
    });
  }
  if (name == "c") {
    return PolicySpec(
        "c", 2,
        [f](int, double s, std::span<double> out) {
          const bool up = f(s) > 0.0;
          out[0] = up ? 0.0 : 1.0;
          out[1] = up ? 1.0 : 0.0;
        },
        positivity_boundaries(f));
  }
  throw std::invalid_argument("unknown policy '" + name + "' (expected behavior, a, b or c)");
}

PolicySpec tabular_policy(std::vector<std::vector<double>> table, std::string name) {
  if (table.empty() || table.front().empty()) throw std::invalid_argument("tabular_policy: empty table");
  const int actions = static_cast<int>(table.front().size());
  for (const auto& row : table) {
    if (static_cast<int>(row.size()) != actions) throw std::invalid_argument("tabular_policy: ragged table");
    check_pmf(row, "tabular_policy: row");
  }
  return PolicySpec(std::move(name), actions,
                    [table = std::move(table)](int, double s, std::span<double> out) {
                      const auto& row = table.at(static_cast<std::size_t>(std::lround(s)));
                      std::copy(row.begin(), row.end(), out.begin());
                    });
}

PolicySpec tabular_policy(std::vector<std::vector<std::vector<double>>> table, std::string name) {
  if (table.empty() || table.front().empty() || table.front().front().empty()) {
    throw std::invalid_argument("tabular_policy: empty table");
  }
  const int actions = static_cast<int>(table.front().front().size());
  for (const auto& step : table) {
    for (const auto& row : step) {
      if (static_cast<int>(row.size()) != actions) throw std::invalid_argument("tabular_policy: ragged table");
      check_pmf(row, "tabular_policy: row");
    }
  }
  return PolicySpec(std::move(name), actions,
                    [table = std::move(table)](int t, double s, std::span<double> out) {
                      const auto& row = table.at(static_cast<std::size_t>(t - 1))
                                            .at(static_cast<std::size_t>(std::lround(s)));
                      std::copy(row.begin(), row.end(), out.begin());
                    });
}

TrajectoryBatch::TrajectoryBatch(std::size_t episodes, int horizon)
    : episodes_(episodes), horizon_(horizon) {
  if (episodes_ < 1) throw std::invalid_argument("TrajectoryBatch: need at least one episode");
  if (horizon_ < 1) throw std::invalid_argument("TrajectoryBatch: horizon must be >= 1");
  states_.assign(static_cast<std::size_t>(horizon_ + 1), std::vector<double>(episodes_, 0.0));
  actions_.assign(static_cast<std::size_t>(horizon_), std::vector<int>(episodes_, 0));
  rewards_.assign(static_cast<std::size_t>(horizon_), std::vector<double>(episodes_, 0.0));
}

std::size_t TrajectoryBatch::idx(int t, int limit) const {
  if (t < 1 || t > limit) {
    throw std::out_of_range("TrajectoryBatch: step " + std::to_string(t) + " outside [1, " +
                            std::to_string(limit) + "]");
  }
  return static_cast<std::size_t>(t - 1);
}

void TrajectoryBatch::write_csv(std::ostream& out) const {
  std::string buf = "episode,t,state,action,reward\n";
  for (std::size_t i = 0; i < episodes_; ++i) {
    const std::string ep = std::to_string(i);
    for (int t = 1; t <= horizon_; ++t) {
      buf += ep;
      buf += ',';
      buf += std::to_string(t);
      buf += ',';
      buf += csv::format_double(state(i, t));
      buf += ',';
      buf += std::to_string(action(i, t));
      buf += ',';
      buf += csv::format_double(reward(i, t));
      buf += '\n';
    }
    buf += ep + ',' + std::to_string(horizon_ + 1) + ',' + csv::format_double(state(i, horizon_ + 1)) + ",,\n";
  }
  out << buf;
}

TrajectoryBatch TrajectoryBatch::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("trajectory CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "episode,t,state,action,reward") {
    throw std::invalid_argument("trajectory CSV: unexpected header '" + line + "'");
  }
  struct Row {
    double state;
    bool has_step;
    int action;
    double reward;
  };
  std::map<long long, std::map<long long, Row>> episodes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    if (f.size() != 5) {
      throw std::invalid_argument("trajectory CSV line " + std::to_string(line_no) + ": expected 5 fields");
    }
    Row row{csv::parse_double(f[2]), !f[3].empty(), 0, 0.0};
    if (row.has_step) {
      row.action = static_cast<int>(csv::parse_int(f[3]));
      row.reward = csv::parse_double(f[4]);
    }
    episodes[csv::parse_int(f[0])][csv::parse_int(f[1])] = row;
  }
  if (episodes.empty()) throw std::invalid_argument("trajectory CSV: no rows");

  const auto& first = episodes.begin()->second;
  const bool terminal_rows = !first.rbegin()->second.has_step;
  const int horizon = static_cast<int>(first.size()) - (terminal_rows ? 1 : 0);
  TrajectoryBatch batch(episodes.size(), horizon);
  std::size_t i = 0;
  for (const auto& [id, steps] : episodes) {
    if (static_cast<int>(steps.size()) != horizon + (terminal_rows ? 1 : 0)) {
      throw std::invalid_argument("trajectory CSV: episode " + std::to_string(id) + " has a different length");
    }
    int t = 1;
    for (const auto& [step, row] : steps) {
      if (step != t) throw std::invalid_argument("trajectory CSV: steps must be 1..T(+1) in episode " + std::to_string(id));
      batch.set_state(i, t, row.state);
      if (t <= horizon) {
        if (!row.has_step) throw std::invalid_argument("trajectory CSV: missing action at step " + std::to_string(t));
        batch.set_action(i, t, row.action);
        batch.set_reward(i, t, row.reward);
      }
      ++t;
    }
    ++i;
  }
  return batch;
}

TrajectoryBatch simulate(const EnvSpec& env, const PolicySpec& policy, std::size_t n,
                         std::uint64_t seed) {
  if (policy.action_count() != env.action_count()) {
    throw std::invalid_argument("simulate: policy and environment disagree on action count");
  }
  const int horizon = env.horizon();
  TrajectoryBatch batch(n, horizon);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    double s = env.sample_initial(rng);
    batch.set_state(i, 1, s);
    for (int t = 1; t <= horizon; ++t) {
      const int a = policy.sample(t, s, rng);
      const auto [next, r] = env.step(s, a, rng);
      batch.set_action(i, t, a);
      batch.set_reward(i, t, r);
      batch.set_state(i, t + 1, next);
      s = next;
    }
  }
  return batch;
}

}  // namespace sieveope::env
