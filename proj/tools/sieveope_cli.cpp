// Command-line front end: simulate, fit, experiment, oracle, kappa.
// Results go to stdout; diagnostics go to stderr.
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sieveope/csv.hpp"
#include "sieveope/env.hpp"
#include "sieveope/experiments.hpp"
#include "sieveope/fqe.hpp"
#include "sieveope/mis.hpp"
#include "sieveope/selection.hpp"

namespace {

using namespace sieveope;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

regress::LambdaRule parse_lambda(const std::string& text) {
  if (text == "default") return regress::LambdaRule::trace_scaled();
  try {
    const double v = csv::parse_double(text);
    if (!(v >= 0.0)) throw UsageError("--lambda must be >= 0");
    return regress::LambdaRule::fixed(v);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError("--lambda must be a nonnegative number or 'default'");
  }
}

env::EnvSpec paper_env(const std::string& name, const std::vector<double>& coefficients, int horizon) {
  if (name != "paper") throw UsageError("--env must be 'paper'");
  if (coefficients.empty()) return env::make_paper_env(horizon);
  return env::make_paper_env(coefficients, horizon);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

struct SimulateArgs {
  std::string env = "paper";
  std::string policy = "behavior";
  std::size_t n = 0;
  int horizon = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<double> coefficients;
};

int run_simulate(const SimulateArgs& a) {
  const auto e = paper_env(a.env, a.coefficients, a.horizon);
  const auto batch = env::simulate(e, env::paper_policy(a.policy, e), a.n, a.seed);
  std::ostringstream buf;
  batch.write_csv(buf);
  write_text(a.out, buf.str());
  std::cerr << "wrote " << a.n << " episodes of horizon " << a.horizon << " to " << a.out << '\n';
  return 0;
}

struct FitArgs {
  std::string data;
  std::string policy;
  std::string k = "loocv";
  std::string lambda = "default";
  std::string out;
  int nodes = 201;
  std::vector<double> coefficients;
};

int run_fit(const FitArgs& a) {
  std::ifstream in(a.data);
  if (!in) throw UsageError("cannot open " + a.data);
  const auto batch = env::TrajectoryBatch::read_csv(in);
  const auto e = paper_env("paper", a.coefficients, batch.horizon());
  const auto target = env::paper_policy(a.policy, e);
  const auto rule = selection::parse_k_rule(a.k);
  const auto lambda = parse_lambda(a.lambda);

  selection::SplineSelector selector(rule, e.action_count(), lambda);
  auto model = fqe::fit(batch, target, selection::as_feature_selector(selector), lambda);
  const double value = fqe::estimate_value(model, e, target, Quadrature{a.nodes});
  if (!a.out.empty()) write_text(a.out, model.to_json() + "\n");
  std::cerr << "fitted T=" << batch.horizon() << " n=" << batch.episodes() << " mean K=" << selector.mean_k()
            << '\n';
  std::cout << csv::format_double(value) << '\n';
  return 0;
}

struct ExperimentArgs {
  std::string config;
  std::optional<int> workers;
  std::string out;
  std::string summary;
};

int run_experiment(const ExperimentArgs& a) {
  auto config = experiments::ExperimentConfig::from_file(a.config);
  if (a.workers) config.workers = *a.workers;
  if (!a.out.empty()) config.output = a.out;
  config.validate();
  const auto records = experiments::run(config);
  std::size_t failures = 0;
  for (const auto& r : records) failures += r.ok ? 0 : 1;
  std::cerr << records.size() << " replicates, " << failures << " failed";
  if (!config.output.empty()) std::cerr << "; results in " << config.output;
  std::cerr << '\n';
  const auto table = experiments::summary_csv(experiments::aggregate(records));
  if (!a.summary.empty()) csv::write_file_atomically(a.summary, table);
  std::cout << table;
  return 0;
}

struct OracleArgs {
  std::string env = "paper";
  std::string policy;
  int horizon = 0;
  std::size_t episodes = 1'000'000;
  std::uint64_t seed = 0;
  std::vector<double> coefficients;
};

int run_oracle(const OracleArgs& a) {
  const auto e = paper_env(a.env, a.coefficients, a.horizon);
  const auto v = experiments::true_value(e, env::paper_policy(a.policy, e),
                                         experiments::MonteCarloOracle{a.episodes, a.seed});
  std::cout << csv::format_double(v.value) << ' ' << csv::format_double(v.standard_error) << '\n';
  return 0;
}

struct KappaArgs {
  std::string env = "paper";
  std::string policy;
  std::size_t n = 0;
  int horizon = 0;
  int k = 0;
  std::uint64_t seed = 0;
  std::string lambda = "default";
  std::vector<double> coefficients;
};

int run_kappa(const KappaArgs& a) {
  const auto e = paper_env(a.env, a.coefficients, a.horizon);
  const auto target = env::paper_policy(a.policy, e);
  const auto b_batch = env::simulate(e, env::uniform_policy(e.action_count()), a.n, derive_seed(a.seed, {0}));
  const auto pi_batch = env::simulate(e, target, a.n, derive_seed(a.seed, {1}));
  const auto features = fqe::spline_features(b_batch, a.k, 3, e.action_count());
  std::cout << csv::format_double(mis::kappa_hat(pi_batch, b_batch, features, parse_lambda(a.lambda))) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon off-policy evaluation with B-spline fitted Q-evaluation"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate episodes and write a trajectory CSV");
  simulate->add_option("--env", sim.env, "Environment preset")->capture_default_str();
  simulate->add_option("--policy", sim.policy, "behavior, a, b or c")->capture_default_str();
  simulate->add_option("--n", sim.n, "Episode count")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--T", sim.horizon, "Horizon")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output CSV")->required();
  simulate->add_option("--f-coefficients", sim.coefficients, "Spline coefficients of f (default preset)");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit FQE on a trajectory CSV and print the value estimate");
  fit_cmd->add_option("--data", fit.data, "Trajectory CSV")->required();
  fit_cmd->add_option("--policy", fit.policy, "Target policy: a, b or c")->required();
  fit_cmd->add_option("--k", fit.k, "K rule: integer, rot:c[:exponent] or loocv")->capture_default_str();
  fit_cmd->add_option("--lambda", fit.lambda, "Ridge level or 'default'")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "Model JSON output");
  fit_cmd->add_option("--nodes", fit.nodes, "Gauss-Legendre nodes per piece")->capture_default_str()->check(CLI::PositiveNumber);
  fit_cmd->add_option("--f-coefficients", fit.coefficients, "Spline coefficients of f (default preset)");

  ExperimentArgs exp;
  auto* experiment = app.add_subcommand("experiment", "Run a replicated experiment grid");
  experiment->add_option("--config", exp.config, "Experiment config JSON")->required();
  experiment->add_option("--workers", exp.workers, "Worker threads")->check(CLI::PositiveNumber);
  experiment->add_option("--out", exp.out, "Results CSV (overrides config output)");
  experiment->add_option("--summary", exp.summary, "Also write the summary table here");

  OracleArgs orc;
  auto* oracle = app.add_subcommand("oracle", "Monte Carlo policy value and standard error");
  oracle->add_option("--env", orc.env, "Environment preset")->capture_default_str();
  oracle->add_option("--policy", orc.policy, "a, b, c or behavior")->required();
  oracle->add_option("--T", orc.horizon, "Horizon")->required()->check(CLI::PositiveNumber);
  oracle->add_option("--episodes", orc.episodes, "Monte Carlo episodes")->capture_default_str()->check(CLI::Range(2ULL, ~0ULL));
  oracle->add_option("--seed", orc.seed, "RNG seed")->capture_default_str();
  oracle->add_option("--f-coefficients", orc.coefficients, "Spline coefficients of f (default preset)");

  KappaArgs kap;
  auto* kappa = app.add_subcommand("kappa", "Distribution-shift diagnostic for a target policy");
  kappa->add_option("--env", kap.env, "Environment preset")->capture_default_str();
  kappa->add_option("--policy", kap.policy, "a, b or c")->required();
  kappa->add_option("--n", kap.n, "Episodes per batch")->required()->check(CLI::PositiveNumber);
  kappa->add_option("--T", kap.horizon, "Horizon")->required()->check(CLI::PositiveNumber);
  kappa->add_option("--k", kap.k, "Basis functions per action")->required()->check(CLI::Range(4, 1000));
  kappa->add_option("--seed", kap.seed, "RNG seed")->capture_default_str();
  kappa->add_option("--lambda", kap.lambda, "Ridge level or 'default'")->capture_default_str();
  kappa->add_option("--f-coefficients", kap.coefficients, "Spline coefficients of f (default preset)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*fit_cmd) return run_fit(fit);
    if (*experiment) return run_experiment(exp);
    if (*oracle) return run_oracle(orc);
    if (*kappa) return run_kappa(kap);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
