#include "sieveope/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "sieveope/csv.hpp"
#include "sieveope/fqe.hpp"

namespace sieveope::experiments {

namespace {

using nlohmann::json;

bool is_symmetric_policy(const env::EnvSpec& env, const env::PolicySpec& policy) {
  return !env.is_tabular() && policy.name() == "a";
}

OracleValue monte_carlo_value(const env::EnvSpec& env, const env::PolicySpec& policy,
                              std::size_t episodes, std::uint64_t seed) {
  if (episodes < 2) throw std::invalid_argument("Monte Carlo oracle needs at least two episodes");
  Rng rng(seed);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < episodes; ++i) {
    double s = env.sample_initial(rng);
    double total = 0.0;
    for (int t = 1; t <= env.horizon(); ++t) {
      const int a = policy.sample(t, s, rng);
      const auto [next, r] = env.step(s, a, rng);
      total += r;
      s = next;
    }
    const double delta = total - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (total - mean);
  }
  const double var = m2 / static_cast<double>(episodes - 1);
  return {mean, std::sqrt(var / static_cast<double>(episodes))};
}

template <typename T>
T get_checked(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw std::invalid_argument("unknown " + where + " key '" + key + "'");
  }
}

selection::KRule parse_k_rule_json(const json& j) {
  if (j.is_string()) return selection::parse_k_rule(j.get<std::string>());
  if (j.is_number_integer()) return selection::FixedK{j.get<int>()};
  if (!j.is_object()) throw std::invalid_argument("k_rule must be a string, integer or object");
  const auto kind = j.value("kind", std::string());
  if (kind == "fixed") {
    reject_unknown(j, {"kind", "k"}, "k_rule");
    return selection::FixedK{get_checked<int>(j.at("k"), "k_rule.k")};
  }
  if (kind == "rule_of_thumb") {
    reject_unknown(j, {"kind", "c", "exponent"}, "k_rule");
    selection::RuleOfThumbK r;
    if (j.contains("c")) r.c = get_checked<double>(j["c"], "k_rule.c");
    if (j.contains("exponent")) r.exponent = get_checked<double>(j["exponent"], "k_rule.exponent");
    return r;
  }
  if (kind == "loocv") {
    reject_unknown(j, {"kind", "candidates"}, "k_rule");
    selection::LoocvK r;
    if (j.contains("candidates")) r.candidates = get_checked<std::vector<int>>(j["candidates"], "k_rule.candidates");
    return r;
  }
  throw std::invalid_argument("k_rule.kind must be fixed, rule_of_thumb or loocv");
}

regress::LambdaRule parse_lambda_json(const json& j) {
  if (j.is_number()) return regress::LambdaRule::fixed(j.get<double>());
  if (j.is_string() && j.get<std::string>() == "default") return regress::LambdaRule::trace_scaled();
  if (!j.is_object()) throw std::invalid_argument("lambda must be a number, \"default\" or object");
  const auto kind = j.value("kind", std::string());
  if (kind == "fixed") {
    reject_unknown(j, {"kind", "value"}, "lambda");
    return regress::LambdaRule::fixed(get_checked<double>(j.at("value"), "lambda.value"));
  }
  if (kind == "trace_scaled") {
    reject_unknown(j, {"kind", "scale"}, "lambda");
    return regress::LambdaRule::trace_scaled(j.contains("scale") ? get_checked<double>(j["scale"], "lambda.scale") : 1e-8);
  }
  throw std::invalid_argument("lambda.kind must be fixed or trace_scaled");
}

MonteCarloOracle parse_mc_oracle(const json& j) {
  MonteCarloOracle mc;
  if (j.contains("episodes")) mc.episodes = get_checked<std::size_t>(j["episodes"], "oracle.episodes");
  if (j.contains("seed")) mc.seed = get_checked<std::uint64_t>(j["seed"], "oracle.seed");
  return mc;
}

OracleSpec parse_oracle_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "symmetry_zero") return SymmetryZeroOracle{};
    if (s == "monte_carlo") return MonteCarloOracle{};
    if (s == "auto") return AutoOracle{};
    throw std::invalid_argument("oracle must be symmetry_zero, monte_carlo or auto");
  }
  if (!j.is_object()) throw std::invalid_argument("oracle must be a string or object");
  const auto kind = j.value("kind", std::string());
  if (kind == "symmetry_zero") {
    reject_unknown(j, {"kind"}, "oracle");
    return SymmetryZeroOracle{};
  }
  reject_unknown(j, {"kind", "episodes", "seed"}, "oracle");
  if (kind == "monte_carlo") return parse_mc_oracle(j);
  if (kind == "auto") return AutoOracle{parse_mc_oracle(j)};
  throw std::invalid_argument("oracle.kind must be symmetry_zero, monte_carlo or auto");
}

Integration parse_integration_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("integration must be an object");
  const auto kind = j.value("kind", std::string());
  if (kind == "quadrature") {
    reject_unknown(j, {"kind", "nodes"}, "integration");
    Quadrature q;
    if (j.contains("nodes")) q.nodes = get_checked<int>(j["nodes"], "integration.nodes");
    return q;
  }
  if (kind == "monte_carlo") {
    reject_unknown(j, {"kind", "samples", "seed"}, "integration");
    MonteCarloIntegration mc;
    if (j.contains("samples")) mc.samples = get_checked<std::size_t>(j["samples"], "integration.samples");
    if (j.contains("seed")) mc.seed = get_checked<std::uint64_t>(j["seed"], "integration.seed");
    return mc;
  }
  throw std::invalid_argument("integration.kind must be quadrature or monte_carlo");
}

template <typename T>
bool strictly_increasing(const std::vector<T>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](const T& a, const T& b) { return !(a < b); }) == v.end();
}

std::uint64_t oracle_seed(const OracleSpec& oracle, const std::string& policy, int horizon) {
  std::uint64_t base = 0;
  if (const auto* mc = std::get_if<MonteCarloOracle>(&oracle)) base = mc->seed;
  if (const auto* au = std::get_if<AutoOracle>(&oracle)) base = au->monte_carlo.seed;
  return derive_seed(base, {hash_name(policy), static_cast<std::uint64_t>(horizon)});
}

}  // namespace

OracleValue true_value(const env::EnvSpec& env, const env::PolicySpec& policy, const OracleSpec& oracle) {
  if (std::holds_alternative<SymmetryZeroOracle>(oracle)) {
    if (!is_symmetric_policy(env, policy)) {
      throw std::invalid_argument("symmetry_zero oracle applies only to policy a on the paper preset");
    }
    return {0.0, 0.0};
  }
  if (const auto* au = std::get_if<AutoOracle>(&oracle)) {
    if (is_symmetric_policy(env, policy)) return {0.0, 0.0};
    return monte_carlo_value(env, policy, au->monte_carlo.episodes, au->monte_carlo.seed);
  }
  const auto& mc = std::get<MonteCarloOracle>(oracle);
  return monte_carlo_value(env, policy, mc.episodes, mc.seed);
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  reject_unknown(j,
                 {"env", "f_coefficients", "policies", "n_grid", "t_grid", "T_grid", "replicates", "k_rule",
                  "lambda", "oracle", "integration", "base_seed", "output", "workers", "record_timing",
                  "degree"},
                 "config");
  ExperimentConfig c;
  if (j.contains("env")) c.env = get_checked<std::string>(j["env"], "env");
  if (j.contains("f_coefficients")) c.f_coefficients = get_checked<std::vector<double>>(j["f_coefficients"], "f_coefficients");
  if (j.contains("policies")) c.policies = get_checked<std::vector<std::string>>(j["policies"], "policies");
  if (j.contains("n_grid")) c.n_grid = get_checked<std::vector<std::size_t>>(j["n_grid"], "n_grid");
  if (j.contains("t_grid") && j.contains("T_grid")) throw std::invalid_argument("give only one of t_grid / T_grid");
  if (j.contains("t_grid")) c.t_grid = get_checked<std::vector<int>>(j["t_grid"], "t_grid");
  if (j.contains("T_grid")) c.t_grid = get_checked<std::vector<int>>(j["T_grid"], "T_grid");
  if (j.contains("replicates")) c.replicates = get_checked<int>(j["replicates"], "replicates");
  if (j.contains("k_rule")) c.k_rule = parse_k_rule_json(j["k_rule"]);
  if (j.contains("lambda")) c.lambda = parse_lambda_json(j["lambda"]);
  if (j.contains("oracle")) c.oracle = parse_oracle_json(j["oracle"]);
  if (j.contains("integration")) c.integration = parse_integration_json(j["integration"]);
  if (j.contains("base_seed")) c.base_seed = get_checked<std::uint64_t>(j["base_seed"], "base_seed");
  if (j.contains("output")) c.output = get_checked<std::string>(j["output"], "output");
  if (j.contains("workers")) c.workers = get_checked<int>(j["workers"], "workers");
  if (j.contains("record_timing")) c.record_timing = get_checked<bool>(j["record_timing"], "record_timing");
  if (j.contains("degree")) c.degree = get_checked<int>(j["degree"], "degree");
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::validate() const {
  if (env != "paper") throw std::invalid_argument("env must be \"paper\"");
  if (policies.empty()) throw std::invalid_argument("policies must be nonempty");
  for (const auto& p : policies) {
    if (p != "a" && p != "b" && p != "c") throw std::invalid_argument("unknown policy '" + p + "'");
  }
  if (n_grid.empty() || !strictly_increasing(n_grid)) throw std::invalid_argument("n_grid must be nonempty and strictly increasing");
  if (t_grid.empty() || !strictly_increasing(t_grid)) throw std::invalid_argument("t_grid must be nonempty and strictly increasing");
  if (n_grid.front() < 2) throw std::invalid_argument("n_grid entries must be >= 2");
  if (t_grid.front() < 1) throw std::invalid_argument("t_grid entries must be >= 1");
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (degree < 0) throw std::invalid_argument("degree must be >= 0");
  if (const auto* f = std::get_if<selection::FixedK>(&k_rule); f && f->k < degree + 1) {
    throw std::invalid_argument("fixed K must be >= degree + 1");
  }
  if (const auto* cv = std::get_if<selection::LoocvK>(&k_rule)) {
    for (const int k : cv->candidates) {
      if (k < degree + 1) throw std::invalid_argument("LOOCV candidates must be >= degree + 1");
    }
  }
  if (const auto* r = std::get_if<selection::RuleOfThumbK>(&k_rule); r && !(r->c > 0.0 && r->exponent > 0.0)) {
    throw std::invalid_argument("rule_of_thumb needs positive c and exponent");
  }
  if (lambda.kind == regress::LambdaRule::Kind::Fixed && !(lambda.value >= 0.0)) {
    throw std::invalid_argument("lambda must be >= 0");
  }
  const MonteCarloOracle* mc = std::get_if<MonteCarloOracle>(&oracle);
  if (const auto* au = std::get_if<AutoOracle>(&oracle)) mc = &au->monte_carlo;
  if (mc && mc->episodes < 10000) throw std::invalid_argument("Monte Carlo oracle needs >= 10000 episodes");
  if (std::holds_alternative<SymmetryZeroOracle>(oracle)) {
    for (const auto& p : policies) {
      if (p != "a") throw std::invalid_argument("symmetry_zero oracle is only valid for policy a");
    }
  }
  if (const auto* q = std::get_if<Quadrature>(&integration); q && q->nodes < 1) {
    throw std::invalid_argument("quadrature needs at least one node");
  }
  if (const auto* m = std::get_if<MonteCarloIntegration>(&integration); m && m->samples < 1) {
    throw std::invalid_argument("Monte Carlo integration needs at least one sample");
  }
  env::make_paper_env(f_coefficients, 1);
}

std::uint64_t replicate_seed(std::uint64_t base_seed, const std::string& policy, std::size_t n,
                             int horizon, int replicate) {
  return derive_seed(base_seed, {hash_name(policy), static_cast<std::uint64_t>(n),
                                 static_cast<std::uint64_t>(horizon), static_cast<std::uint64_t>(replicate)});
}

ExperimentRecord run_replicate(const ExperimentConfig& config, const env::EnvSpec& env,
                               const std::string& policy, std::size_t n, int replicate,
                               double nu_true) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentRecord rec;
  rec.policy = policy;
  rec.n = n;
  rec.horizon = env.horizon();
  rec.k_rule = selection::label(config.k_rule);
  rec.replicate = replicate;
  rec.nu_true = nu_true;
  rec.seed = replicate_seed(config.base_seed, policy, n, env.horizon(), replicate);

  try {
    const auto behavior = env::uniform_policy(env.action_count());
    const auto target = env::paper_policy(policy, env);
    const auto batch = env::simulate(env, behavior, n, rec.seed);
    selection::SplineSelector selector(config.k_rule, env.action_count(), config.lambda, config.degree);
    auto model = fqe::fit(batch, target, selection::as_feature_selector(selector), config.lambda);
    rec.nu_hat = fqe::estimate_value(model, env, target, config.integration);
    rec.k_mean = selector.mean_k();
    rec.abs_error = std::abs(rec.nu_hat - rec.nu_true);
    if (!std::isfinite(rec.abs_error)) throw std::runtime_error("non-finite estimate");
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.reason = e.what();
    rec.nu_hat = 0.0;
    rec.abs_error = 0.0;
  }
  if (config.record_timing) {
    rec.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return rec;
}

std::vector<ExperimentRecord> run(const ExperimentConfig& config) {
  config.validate();

  struct Item {
    std::string policy;
    std::size_t n;
    int horizon;
    int replicate;
  };
  std::vector<Item> items;
  for (const auto& p : config.policies) {
    for (const auto n : config.n_grid) {
      for (const int t : config.t_grid) {
        for (int r = 0; r < config.replicates; ++r) items.push_back({p, n, t, r});
      }
    }
  }

  std::map<int, env::EnvSpec> envs;
  for (const int t : config.t_grid) envs.emplace(t, env::make_paper_env(config.f_coefficients, t));

  // Oracle values once per (policy, T), seeded by the oracle seed only.
  std::map<std::pair<std::string, int>, double> truth;
  for (const auto& p : config.policies) {
    for (const int t : config.t_grid) {
      const auto& e = envs.at(t);
      OracleSpec spec = config.oracle;
      if (auto* mc = std::get_if<MonteCarloOracle>(&spec)) mc->seed = oracle_seed(config.oracle, p, t);
      if (auto* au = std::get_if<AutoOracle>(&spec)) au->monte_carlo.seed = oracle_seed(config.oracle, p, t);
      truth[{p, t}] = true_value(e, env::paper_policy(p, e), spec).value;
    }
  }

  std::vector<ExperimentRecord> records(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) {
      const auto& it = items[i];
      records[i] = run_replicate(config, envs.at(it.horizon), it.policy, it.n, it.replicate,
                                 truth.at({it.policy, it.horizon}));
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), items.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  if (!config.output.empty()) csv::write_file_atomically(config.output, results_csv(records));
  return records;
}

std::string results_csv(const std::vector<ExperimentRecord>& records) {
  std::string out = std::string(kResultsHeader) + '\n';
  for (const auto& r : records) {
    std::string reason = r.reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    out += r.policy + ',' + std::to_string(r.n) + ',' + std::to_string(r.horizon) + ',' + r.k_rule + ',' +
           (r.ok ? csv::format_double(r.k_mean) : std::string()) + ',' + std::to_string(r.replicate) + ',' +
           (r.ok ? csv::format_double(r.nu_hat) : std::string()) + ',' + csv::format_double(r.nu_true) + ',' +
           (r.ok ? csv::format_double(r.abs_error) : std::string()) + ',' + std::to_string(r.seed) + ',' +
           csv::format_double(r.wall_time_ms) + ',' + (r.ok ? "ok" : "error") + ',' + reason + '\n';
  }
  return out;
}

double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<SummaryRow> aggregate(const std::vector<ExperimentRecord>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  // Keep first-seen cell order so summaries follow the grid order.
  std::vector<std::tuple<std::string, std::size_t, int>> order;
  std::map<std::tuple<std::string, std::size_t, int>, std::pair<std::vector<double>, std::size_t>> cells;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.policy, r.n, r.horizon);
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) order.push_back(key);
    if (r.ok) it->second.first.push_back(r.abs_error); else ++it->second.second;
  }
  std::vector<SummaryRow> rows;
  rows.reserve(order.size());
  for (const auto& key : order) {
    auto& [errors, failures] = cells.at(key);
    SummaryRow row{std::get<0>(key), std::get<1>(key), std::get<2>(key), 0, 0, 0, 0, failures};
    if (!errors.empty()) {
      std::sort(errors.begin(), errors.end());
      double sum = 0.0;
      for (const double e : errors) sum += e;
      row.mean = sum / static_cast<double>(errors.size());
      row.median = quantile(errors, 0.5);
      row.q10 = quantile(errors, 0.1);
      row.q90 = quantile(errors, 0.9);
    } else {
      row.mean = row.median = row.q10 = row.q90 = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = std::string(kSummaryHeader) + '\n';
  for (const auto& r : rows) {
    out += r.policy + ',' + std::to_string(r.n) + ',' + std::to_string(r.horizon) + ',' +
           csv::format_double(r.mean) + ',' + csv::format_double(r.median) + ',' + csv::format_double(r.q10) +
           ',' + csv::format_double(r.q90) + ',' + std::to_string(r.failures) + '\n';
  }
  return out;
}

}  // namespace sieveope::experiments
