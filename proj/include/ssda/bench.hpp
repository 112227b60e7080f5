#pragma once

// Monte-Carlo harness for the three shift scenarios.

#include "ssda/estimators.hpp"
#include "ssda/finetune.hpp"
#include "ssda/io.hpp"
#include "ssda/masft.hpp"
#include "ssda/rng.hpp"
#include "ssda/scm.hpp"
#include "ssda/types.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace ssda {

inline const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> m{"OLS-Tar", "OLS-Src",   "OLS-Pool",   "DIP",   "CIP",
                                          "FT-DIP",  "FT-OLS-L1", "FT-OLS-L2",  "FT-CIP", "FT-CIP-Tar",
                                          "MASFT",   "OLS-Tar-MoreData"};
  return m;
}

enum class Scenario { CA, SC, AW, Custom };
enum class RiskMode { Population, Empirical, Both };

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::CA: return "ca";
    case Scenario::SC: return "sc";
    case Scenario::AW: return "aw";
    case Scenario::Custom: break;
  }
  return "custom";
}

inline std::string to_string(RiskMode r) {
  switch (r) {
    case RiskMode::Population: return "population";
    case RiskMode::Empirical: return "empirical";
    case RiskMode::Both: break;
  }
  return "both";
}

struct SimConfig {
  Scenario scenario = Scenario::CA;
  int d = 100;
  int r = 5;
  int m_sources = 4;
  long n_src_labeled = 6000;
  long n_src_unlabeled = 6000;
  long n_tar_labeled = 100;
  long n_tar_unlabeled = 10000;
  long n_val = 100;
  long n_test = 50000;
  long n_oracle = 50000;
  int trials = 20;
  std::uint64_t base_seed = 42;
  std::vector<std::string> methods = all_methods();
  int lambda_count = 20;
  double lambda_lo = 1e-4;
  double lambda_hi = 1e2;
  double rho = kInf;
  std::vector<int> r_dip_grid;
  bool include_cip_tar = true;
  RiskMode risk = RiskMode::Population;
  bool timing = false;
  std::string env_path;  // Custom scenario only
  std::string out_path = "results";
};

/// Full-scale defaults for each scenario.
inline SimConfig default_config(Scenario s) {
  SimConfig c;
  c.scenario = s;
  switch (s) {
    case Scenario::SC:
      c.r = 10;
      c.n_src_labeled = c.n_src_unlabeled = c.n_tar_unlabeled = 10000;
      break;
    case Scenario::AW:
      c.r = 4;
      c.m_sources = 11;
      break;
    case Scenario::CA:
    case Scenario::Custom:
      break;
  }
  return c;
}

inline Scenario scenario_from_string(const std::string& s) {
  if (s == "ca" || s == "CA") return Scenario::CA;
  if (s == "sc" || s == "SC") return Scenario::SC;
  if (s == "aw" || s == "AW") return Scenario::AW;
  if (s == "custom") return Scenario::Custom;
  throw ConfigError("unknown scenario '" + s + "' (expected ca, sc, aw or custom)");
}

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    T out;
    if constexpr (std::is_same_v<T, double>) {
      out = io::parse_double(v);
      pos = v.size();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      out = std::stoull(v, &pos);
    } else {
      out = static_cast<T>(std::stol(v, &pos));
    }
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("invalid value for '" + key + "': '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean for '" + key + "': '" + v + "'");
}

inline std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  for (auto& s : io::split(v, ',')) {
    auto t = io::trim(s);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace detail

/// Applies `key = value` overrides in order. Keys use underscores; dashes are
/// accepted as well.
inline void apply_overrides(SimConfig& c, const std::vector<std::pair<std::string, std::string>>& kv) {
  using detail::parse_number;
  for (auto [key, v] : kv) {
    std::replace(key.begin(), key.end(), '-', '_');
    if (key == "scenario" || key == "sim") c.scenario = scenario_from_string(v);
    else if (key == "d") c.d = parse_number<int>(key, v);
    else if (key == "r") c.r = parse_number<int>(key, v);
    else if (key == "sources" || key == "m_sources") c.m_sources = parse_number<int>(key, v);
    else if (key == "n_src") c.n_src_labeled = parse_number<long>(key, v);
    else if (key == "n_src_u") c.n_src_unlabeled = parse_number<long>(key, v);
    else if (key == "n_tar") c.n_tar_labeled = parse_number<long>(key, v);
    else if (key == "n_tar_u") c.n_tar_unlabeled = parse_number<long>(key, v);
    else if (key == "n_val") c.n_val = parse_number<long>(key, v);
    else if (key == "n_test") c.n_test = parse_number<long>(key, v);
    else if (key == "n_oracle") c.n_oracle = parse_number<long>(key, v);
    else if (key == "trials") c.trials = parse_number<int>(key, v);
    else if (key == "seed") c.base_seed = parse_number<std::uint64_t>(key, v);
    else if (key == "methods") c.methods = detail::parse_list(v);
    else if (key == "lambda_count") c.lambda_count = parse_number<int>(key, v);
    else if (key == "lambda_lo") c.lambda_lo = parse_number<double>(key, v);
    else if (key == "lambda_hi") c.lambda_hi = parse_number<double>(key, v);
    else if (key == "rho") c.rho = parse_number<double>(key, v);
    else if (key == "r_dip_grid") {
      c.r_dip_grid.clear();
      for (const auto& s : detail::parse_list(v)) c.r_dip_grid.push_back(parse_number<int>(key, s));
    } else if (key == "include_cip_tar") c.include_cip_tar = detail::parse_bool(key, v);
    else if (key == "risk") {
      if (v == "population") c.risk = RiskMode::Population;
      else if (v == "empirical") c.risk = RiskMode::Empirical;
      else if (v == "both") c.risk = RiskMode::Both;
      else throw ConfigError("invalid value for 'risk': '" + v + "'");
    } else if (key == "timing") c.timing = detail::parse_bool(key, v);
    else if (key == "env") c.env_path = v;
    else if (key == "out") c.out_path = v;
    else throw ConfigError("unknown configuration key '" + key + "'");
  }
}

/// Scenario defaults, then overrides. The scenario key is resolved first so
/// its defaults sit underneath every other key.
inline SimConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& kv) {
  Scenario s = Scenario::CA;
  for (const auto& [k, v] : kv)
    if (k == "scenario" || k == "sim") s = scenario_from_string(v);
  SimConfig c = default_config(s);
  apply_overrides(c, kv);
  return c;
}

inline void validate(const SimConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (c.d < 2) fail("d must be at least 2");
  if (c.r < 1) fail("r must be >= 1");
  if (c.r >= c.d) fail("r must be < d");
  if (c.m_sources < 1) fail("sources must be >= 1");
  if (c.n_src_labeled < 1 || c.n_src_unlabeled < 1 || c.n_tar_labeled < 1 || c.n_tar_unlabeled < 1 || c.n_val < 1 ||
      c.n_test < 1 || c.n_oracle < 1)
    fail("all sample sizes must be >= 1");
  if (c.trials < 1) fail("trials must be >= 1");
  if (c.lambda_count < 1 || !(c.lambda_lo > 0.0) || !(c.lambda_hi >= c.lambda_lo)) fail("invalid lambda grid");
  if (!(c.rho > 0.0)) fail("rho must be positive");
  if (c.scenario == Scenario::AW && c.m_sources < c.r + 1) fail("AW scenario needs sources >= r + 1");
  if (c.scenario == Scenario::AW && c.m_sources > c.d) fail("AW scenario needs sources <= d");
  if (c.scenario == Scenario::Custom && c.env_path.empty()) fail("custom scenario needs an environment file (env)");
  for (int r : c.r_dip_grid)
    if (r < 0 || r >= c.d) fail("r_dip_grid entries must lie in [0, d)");
  for (const auto& m : c.methods)
    if (std::find(all_methods().begin(), all_methods().end(), m) == all_methods().end())
      fail("unknown method '" + m + "'");
  if (c.methods.empty()) fail("methods must not be empty");
}

/// Full resolved configuration as `key = value` lines.
inline std::string format_config(const SimConfig& c) {
  std::ostringstream o;
  o << "scenario = " << to_string(c.scenario) << '\n'
    << "d = " << c.d << '\n'
    << "r = " << c.r << '\n'
    << "sources = " << c.m_sources << '\n'
    << "n_src = " << c.n_src_labeled << '\n'
    << "n_src_u = " << c.n_src_unlabeled << '\n'
    << "n_tar = " << c.n_tar_labeled << '\n'
    << "n_tar_u = " << c.n_tar_unlabeled << '\n'
    << "n_val = " << c.n_val << '\n'
    << "n_test = " << c.n_test << '\n'
    << "n_oracle = " << c.n_oracle << '\n'
    << "trials = " << c.trials << '\n'
    << "seed = " << c.base_seed << '\n'
    << "methods = ";
  for (std::size_t i = 0; i < c.methods.size(); ++i) o << (i ? "," : "") << c.methods[i];
  o << '\n'
    << "lambda_count = " << c.lambda_count << '\n'
    << "lambda_lo = " << io::fmt(c.lambda_lo) << '\n'
    << "lambda_hi = " << io::fmt(c.lambda_hi) << '\n'
    << "rho = " << io::fmt(c.rho) << '\n'
    << "r_dip_grid = ";
  for (std::size_t i = 0; i < c.r_dip_grid.size(); ++i) o << (i ? "," : "") << c.r_dip_grid[i];
  o << '\n'
    << "include_cip_tar = " << (c.include_cip_tar ? "true" : "false") << '\n'
    << "risk = " << to_string(c.risk) << '\n'
    << "timing = " << (c.timing ? "true" : "false") << '\n';
  if (!c.env_path.empty()) o << "env = " << c.env_path << '\n';
  o << "out = " << c.out_path << '\n';
  return o.str();
}

// ---------------------------------------------------------------- excess risk

struct RiskValue {
  double value = 0.0;
  double clamped = 0.0;  // magnitude removed by the clamp at zero
};

/// (β - β*)ᵀ Σ_X^(0) (β - β*), clamped at zero.
inline RiskValue excess_risk_population(const Vector& beta, const Vector& beta_star, const Matrix& sigma_target) {
  const Vector diff = beta - beta_star;
  const double v = diff.dot(sigma_target * diff);
  return v < 0.0 ? RiskValue{0.0, -v} : RiskValue{v, 0.0};
}

inline RiskValue excess_risk_population(const LinearPredictor& pred, const DomainParams& target) {
  const auto pm = population_moments(target);
  return excess_risk_population(pred.beta, ols_moments(pm.as_moments()).beta, pm.sigma_x);
}

/// Empirical risk difference against an oracle fit, clamped at zero.
inline RiskValue excess_risk_empirical(const LinearPredictor& pred, const Dataset& test, const LinearPredictor& oracle) {
  const double v = empirical_risk(pred, test) - empirical_risk(oracle, test);
  return v < 0.0 ? RiskValue{0.0, -v} : RiskValue{v, 0.0};
}

// ---------------------------------------------------------------- simulation

struct MethodResult {
  double excess_risk = std::numeric_limits<double>::quiet_NaN();
  double excess_risk_empirical = std::numeric_limits<double>::quiet_NaN();
  bool selected = false;
  double wallclock_ms = 0.0;
  std::string error;
};

struct TrialResult {
  int trial = 0;
  std::map<std::string, MethodResult> methods;
  std::string masft_pick;
  SelectionReport selection;
  int clamp_events = 0;
};

struct SummaryRow {
  std::string method;
  double mean = 0.0;
  double std = 0.0;
  int n_trials = 0;
};

struct ResultsTable {
  SimConfig config;
  std::vector<TrialResult> trials;

  std::vector<SummaryRow> summary(bool empirical = false) const;
  int clamp_events() const {
    int n = 0;
    for (const auto& t : trials) n += t.clamp_events;
    return n;
  }
};

/// Mean and sample standard deviation over finite per-trial values.
inline std::vector<SummaryRow> ResultsTable::summary(bool empirical) const {
  std::vector<SummaryRow> out;
  for (const auto& m : config.methods) {
    SummaryRow row;
    row.method = m;
    std::vector<double> vals;
    for (const auto& t : trials) {
      auto it = t.methods.find(m);
      if (it == t.methods.end()) continue;
      const double v = empirical ? it->second.excess_risk_empirical : it->second.excess_risk;
      if (std::isfinite(v)) vals.push_back(v);
    }
    row.n_trials = static_cast<int>(vals.size());
    if (!vals.empty()) {
      double s = 0.0;
      for (double v : vals) s += v;
      row.mean = s / vals.size();
      double ss = 0.0;
      for (double v : vals) ss += (v - row.mean) * (v - row.mean);
      row.std = vals.size() > 1 ? std::sqrt(ss / (vals.size() - 1)) : 0.0;
    } else {
      row.mean = row.std = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(row);
  }
  return out;
}

inline EnvironmentSet make_environment(const SimConfig& c, std::uint64_t seed) {
  switch (c.scenario) {
    case Scenario::CA: return make_ca_environments(c.d, c.r, c.m_sources, seed);
    case Scenario::SC: return make_sc_environments(c.d, c.r, c.m_sources, seed);
    case Scenario::AW: return make_aw_environments(c.d, c.r, c.m_sources, seed);
    case Scenario::Custom: break;
  }
  std::ifstream in(c.env_path);
  if (!in) throw Error("cannot open environment file '" + c.env_path + "'");
  return read_environment(in);
}

/// Every dataset a trial draws, from seeds derived off (base, trial, domain, role).
inline TrialData sample_trial(const SimConfig& c, const EnvironmentSet& env, int trial) {
  const auto t = static_cast<std::uint64_t>(trial);
  auto seed = [&](int tag, Role role) { return derive_seed(c.base_seed, t, tag, role); };
  TrialData data;
  for (int m = 1; m <= env.num_sources(); ++m) {
    data.src_labeled.push_back(sample_labeled(env.domain(m), c.n_src_labeled, seed(m, Role::Labeled), m));
    data.src_unlabeled.push_back(sample_unlabeled(env.domain(m), c.n_src_unlabeled, seed(m, Role::Unlabeled), m));
  }
  data.tar_labeled = sample_labeled(env.target, c.n_tar_labeled, seed(0, Role::Labeled), 0);
  data.tar_unlabeled = sample_unlabeled(env.target, c.n_tar_unlabeled, seed(0, Role::Unlabeled), 0);
  data.val = sample_labeled(env.target, c.n_val, seed(0, Role::Validation), 0);
  return data;
}

inline SuiteConfig suite_config(const SimConfig& c) {
  SuiteConfig s;
  s.r_dip = c.r;
  s.r_dip_grid = c.r_dip_grid;
  s.r_cip = c.r;
  s.rho = c.rho;
  s.lambda_count = c.lambda_count;
  s.lambda_lo = c.lambda_lo;
  s.lambda_hi = c.lambda_hi;
  s.include_cip_tar = c.include_cip_tar;
  return s;
}

/// One trial: a pure function of (config, trial index).
inline TrialResult run_trial(const SimConfig& c, int trial) {
  using clock = std::chrono::steady_clock;
  const auto env = make_environment(c, derive_seed(c.base_seed, static_cast<std::uint64_t>(trial), 0, Role::Environment));
  const TrialData data = sample_trial(c, env, trial);
  const SuiteConfig scfg = suite_config(c);

  const auto pm = population_moments(env.target);
  const Vector beta_star = oracle_population(env.target).beta;

  const bool want_emp = c.risk != RiskMode::Population;
  std::optional<Dataset> test;
  std::optional<LinearPredictor> oracle_fit;
  if (want_emp) {
    const auto t = static_cast<std::uint64_t>(trial);
    test = sample_labeled(env.target, c.n_test, derive_seed(c.base_seed, t, 0, Role::Test), 0);
    oracle_fit = ols_fit(sample_labeled(env.target, c.n_oracle, derive_seed(c.base_seed, t, 0, Role::Oracle), 0));
  }

  auto wants = [&](const std::string& m) { return std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end(); };
  const bool need_suite = wants("MASFT") || wants("FT-DIP") || wants("FT-OLS-L1") || wants("FT-CIP") || wants("FT-CIP-Tar");

  TrialResult res;
  res.trial = trial;

  std::optional<CandidateSuite> suite;
  double suite_ms = 0.0;
  if (need_suite) {
    const auto t0 = clock::now();
    suite = build_candidate_suite(data, scfg);
    suite_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    res.selection = masft_select(*suite, data.val);
    res.masft_pick = suite->candidates[res.selection.index].name;
  }
  auto from_suite = [&](const std::string& cand) -> LinearPredictor {
    const Candidate* cd = suite->find(cand);
    if (!cd) throw Error("candidate " + cand + " unavailable");
    if (cd->failed) throw Error(cd->error);
    return cd->predictor;
  };

  std::optional<LinearPredictor> cip;
  auto get_cip = [&]() -> const LinearPredictor& {
    if (!cip) cip = cip_mean_fit(data.src_labeled, clipped_cip_rank(data, scfg));
    return *cip;
  };

  const std::map<std::string, std::function<LinearPredictor()>> fits{
      {"OLS-Tar", [&] { return ols_fit(data.tar_labeled, "OLS-Tar"); }},
      {"OLS-Src", [&] { return ols_fit(data.src_labeled.front(), "OLS-Src"); }},
      {"OLS-Pool", [&] { return ols_pool_fit(data.src_labeled); }},
      {"DIP", [&] { return dip_cov_fit(data.src_labeled.front(), data.src_unlabeled.front(), *data.tar_unlabeled, c.r); }},
      {"CIP", [&] { return get_cip(); }},
      {"FT-DIP", [&] { return from_suite("FT-DIP-1"); }},
      {"FT-OLS-L1", [&] { return from_suite("FT-OLS-Src-1"); }},
      {"FT-OLS-L2",
       [&] {
         const auto ls = ols_fit(data.src_labeled.front(), "OLS-Src");
         const auto grid = lambda_grid(data.tar_labeled, c.lambda_count, c.lambda_lo, c.lambda_hi);
         return tune_ft_ols(ls, data.tar_labeled, data.val, AnchoredPenalty::Norm::L2, grid, kInf, "FT-OLS-L2");
       }},
      {"FT-CIP", [&] { return from_suite("FT-CIP"); }},
      {"FT-CIP-Tar", [&] { return from_suite("FT-CIP-Tar"); }},
      {"MASFT", [&] { return res.selection.predictor; }},
      {"OLS-Tar-MoreData",
       [&] {
         const long n_new = static_cast<long>(std::ceil(static_cast<double>(c.d) * c.n_tar_labeled / c.r));
         const auto seed = derive_seed(c.base_seed, static_cast<std::uint64_t>(trial), 0, Role::MoreData);
         return ols_fit(sample_labeled(env.target, n_new, seed, 0), "OLS-Tar-MoreData");
       }},
  };

  for (const auto& name : c.methods) {
    MethodResult mr;
    const auto t0 = clock::now();
    try {
      const LinearPredictor p = fits.at(name)();
      if (!p.finite()) throw Error("non-finite coefficients");
      if (c.risk != RiskMode::Empirical) {
        const auto rv = excess_risk_population(p.beta, beta_star, pm.sigma_x);
        mr.excess_risk = rv.value;
        if (rv.clamped > 0.0) ++res.clamp_events;
      }
      if (want_emp) {
        const auto rv = excess_risk_empirical(p, *test, *oracle_fit);
        mr.excess_risk_empirical = rv.value;
        if (rv.clamped > 0.0) ++res.clamp_events;
        if (c.risk == RiskMode::Empirical) mr.excess_risk = rv.value;
      }
    } catch (const std::exception& e) {
      mr.error = e.what();
    }
    mr.wallclock_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    if (name.rfind("FT-", 0) == 0 && name != "FT-OLS-L2") mr.wallclock_ms += suite_ms;
    res.methods[name] = mr;
  }

  if (suite) {
    static const std::map<std::string, std::string> pick_to_method{
        {"FT-DIP-1", "FT-DIP"}, {"FT-OLS-Src-1", "FT-OLS-L1"}, {"FT-CIP", "FT-CIP"}, {"FT-CIP-Tar", "FT-CIP-Tar"}};
    auto it = pick_to_method.find(res.masft_pick);
    if (it != pick_to_method.end() && res.methods.count(it->second)) res.methods[it->second].selected = true;
  }
  return res;
}

/// Worker count: SSDA_THREADS if set and positive, otherwise the hardware
/// concurrency, never more than `jobs`.
inline int worker_count(int jobs) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SSDA_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) n = v;
    } catch (const std::exception&) {
    }
  }
  return std::clamp(n, 1, std::max(jobs, 1));
}

/// Calls fn(i) for i in [0, jobs) on a small thread pool.
inline void parallel_for(int jobs, const std::function<void(int)>& fn) {
  const int workers = worker_count(jobs);
  if (workers <= 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < jobs; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline ResultsTable run_simulation(const SimConfig& cfg) {
  validate(cfg);
  ResultsTable table;
  table.config = cfg;
  table.trials.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, [&](int t) { table.trials[static_cast<std::size_t>(t)] = run_trial(cfg, t); });
  return table;
}

// ---------------------------------------------------------------- output

inline std::string provenance_line(const SimConfig& c) {
  std::ostringstream o;
  o << "# scenario=" << to_string(c.scenario) << " d=" << c.d << " r=" << c.r << " sources=" << c.m_sources
    << " seed=" << c.base_seed << " risk=" << to_string(c.risk) << " noise_cov_x=I noise_var_y=1";
  return o.str();
}

inline void write_trials_csv(std::ostream& out, const ResultsTable& t) {
  const bool both = t.config.risk == RiskMode::Both;
  out << provenance_line(t.config) << '\n';
  out << "trial,method,excess_risk," << (both ? "excess_risk_empirical," : "") << "selected,wallclock_ms\n";
  for (const auto& tr : t.trials)
    for (const auto& m : t.config.methods) {
      const auto& r = tr.methods.at(m);
      out << tr.trial << ',' << m << ',' << io::fmt(r.excess_risk) << ',';
      if (both) out << io::fmt(r.excess_risk_empirical) << ',';
      out << (r.selected ? 1 : 0) << ',' << io::fmt(t.config.timing ? r.wallclock_ms : 0.0) << '\n';
    }
}

inline void write_summary_csv(std::ostream& out, const ResultsTable& t) {
  out << provenance_line(t.config) << '\n';
  out << "method,mean,std,n_trials\n";
  for (const auto& row : t.summary())
    out << row.method << ',' << io::fmt(row.mean) << ',' << io::fmt(row.std) << ',' << row.n_trials << '\n';
  if (t.config.risk == RiskMode::Both)
    for (const auto& row : t.summary(true))
      out << row.method << "[empirical]," << io::fmt(row.mean) << ',' << io::fmt(row.std) << ',' << row.n_trials
          << '\n';
}

inline void write_masft_csv(std::ostream& out, const ResultsTable& t) {
  out << "trial,candidate,val_risk,selected\n";
  for (const auto& tr : t.trials)
    for (std::size_t i = 0; i < tr.selection.names.size(); ++i)
      out << tr.trial << ',' << tr.selection.names[i] << ',' << io::fmt(tr.selection.risks[i]) << ','
          << (i == tr.selection.index ? 1 : 0) << '\n';
}

/// Writes trials.csv, summary.csv, masft.csv and run.meta under cfg.out_path.
inline void write_outputs(const ResultsTable& t) {
  namespace fs = std::filesystem;
  const fs::path dir(t.config.out_path);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write '" + (dir / name).string() + "'");
    return f;
  };
  {
    auto f = open("trials.csv");
    write_trials_csv(f, t);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, t);
  }
  {
    auto f = open("masft.csv");
    write_masft_csv(f, t);
  }
  {
    auto f = open("run.meta");
    f << format_config(t.config);
    f << "clamp_events = " << t.clamp_events() << '\n';
    for (const auto& tr : t.trials)
      for (const auto& [m, r] : tr.methods)
        if (!r.error.empty()) f << "# trial " << tr.trial << ' ' << m << " failed: " << r.error << '\n';
  }
}

}  // namespace ssda
