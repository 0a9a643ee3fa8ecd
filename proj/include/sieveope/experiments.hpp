#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sieveope/env.hpp"
#include "sieveope/integration.hpp"
#include "sieveope/regress.hpp"
#include "sieveope/selection.hpp"

namespace sieveope::experiments {

/// nu = 0 exactly; valid only for policy (a) on the `paper` preset.
struct SymmetryZeroOracle {};

/// Mean total reward over fresh target-policy episodes.
struct MonteCarloOracle {
  std::size_t episodes = 1'000'000;
  std::uint64_t seed = 0;
};

/// Symmetry oracle for policy (a), Monte Carlo for everything else.
struct AutoOracle {
  MonteCarloOracle monte_carlo;
};

using OracleSpec = std::variant<SymmetryZeroOracle, MonteCarloOracle, AutoOracle>;

struct OracleValue {
  double value = 0.0;
  double standard_error = 0.0;
};

/// True policy value of `policy` on `env` (horizon from env).
/// Throws std::invalid_argument when the symmetry oracle does not apply.
OracleValue true_value(const env::EnvSpec& env, const env::PolicySpec& policy, const OracleSpec& oracle);

struct ExperimentConfig {
  std::string env = "paper";
  std::vector<double> f_coefficients = env::default_f_coefficients();
  std::vector<std::string> policies{"a"};
  std::vector<std::size_t> n_grid;
  std::vector<int> t_grid;
  int replicates = 1;
  selection::KRule k_rule = selection::LoocvK{};
  regress::LambdaRule lambda = regress::LambdaRule::trace_scaled();
  OracleSpec oracle = AutoOracle{};
  Integration integration = Quadrature{};
  std::uint64_t base_seed = 0;
  std::string output;
  int workers = 1;
  /// Wall time makes output nondeterministic, so it is recorded only on request.
  bool record_timing = false;
  int degree = 3;

  /// snake_case keys; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);

  /// Throws std::invalid_argument on the first violated constraint.
  void validate() const;
};

struct ExperimentRecord {
  std::string policy;
  std::size_t n = 0;
  int horizon = 0;
  std::string k_rule;
  double k_mean = 0.0;
  int replicate = 0;
  double nu_hat = 0.0;
  double nu_true = 0.0;
  double abs_error = 0.0;
  std::uint64_t seed = 0;
  double wall_time_ms = 0.0;
  bool ok = true;
  std::string reason;
};

/// Child seed for one replicate; depends only on (base, policy, n, T, replicate).
std::uint64_t replicate_seed(std::uint64_t base_seed, const std::string& policy, std::size_t n,
                             int horizon, int replicate);

/// One replicate: simulate behavior data, fit FQE, compare to nu_true.
ExperimentRecord run_replicate(const ExperimentConfig& config, const env::EnvSpec& env,
                               const std::string& policy, std::size_t n, int replicate,
                               double nu_true);

/// Runs the whole grid on a bounded worker pool. Records come back in
/// (policy, n, T, replicate) order. Writes the results CSV when
/// config.output is set.
std::vector<ExperimentRecord> run(const ExperimentConfig& config);

inline constexpr const char* kResultsHeader =
    "policy,n,T,k_rule,k_mean,replicate,nu_hat,nu_true,abs_error,seed,wall_time_ms,status,reason";
inline constexpr const char* kSummaryHeader = "policy,n,T,mean,median,q10,q90,failures";

std::string results_csv(const std::vector<ExperimentRecord>& records);

struct SummaryRow {
  std::string policy;
  std::size_t n = 0;
  int horizon = 0;
  double mean = 0.0;
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
  std::size_t failures = 0;
};

/// Per (policy, n, T) statistics of abs_error over successful replicates.
std::vector<SummaryRow> aggregate(const std::vector<ExperimentRecord>& records);

std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Linear interpolation between order statistics of `sorted`.
double quantile(const std::vector<double>& sorted, double p);

}  // namespace sieveope::experiments
