#pragma once

// Command-line front end for run_simulation.
//
// Exit codes: 0 success, 1 configuration error (including bad flags),
// 2 runtime failure.

#include "ssda/bench.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ssda {

struct CliStreams {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

inline int cli_main(int argc, const char* const* argv, CliStreams io_streams = {}) {
  std::ostream& out = io_streams.out;
  std::ostream& err = io_streams.err;

  CLI::App app{"Semi-supervised domain adaptation benchmarks over anticausal linear SCMs", "ssda_bench"};
  app.set_help_flag("-h,--help", "Show this help and exit");

  // Every value flag maps one-to-one onto a config-file key. Repeats: last wins.
  const std::vector<std::pair<std::string, std::string>> value_flags{
      {"--sim", "Scenario: ca, sc, aw or custom"},
      {"--d", "Covariate dimension"},
      {"--r", "Intervention rank (r_ca, r_sc or r_aw)"},
      {"--sources", "Number of source domains M"},
      {"--n-src", "Labeled samples per source"},
      {"--n-src-u", "Unlabeled samples per source"},
      {"--n-tar", "Labeled target samples"},
      {"--n-tar-u", "Unlabeled target samples"},
      {"--n-val", "Labeled target validation samples"},
      {"--n-test", "Target test samples (empirical risk)"},
      {"--n-oracle", "Target samples for the empirical oracle fit"},
      {"--trials", "Monte-Carlo trials"},
      {"--seed", "Base seed"},
      {"--methods", "Comma-separated method list"},
      {"--lambda-count", "Points in the FT-OLS lambda grid"},
      {"--lambda-lo", "Lower end of the lambda grid (relative)"},
      {"--lambda-hi", "Upper end of the lambda grid (relative)"},
      {"--rho", "Fine-tuning cap (inf disables it)"},
      {"--r-dip-grid", "Comma-separated DIP ranks tuned on validation"},
      {"--risk", "population, empirical or both"},
      {"--env", "Environment file for the custom scenario"},
      {"--out", "Output directory"},
  };
  std::vector<std::string> values(value_flags.size());
  std::vector<CLI::Option*> options;
  for (std::size_t i = 0; i < value_flags.size(); ++i)
    options.push_back(app.add_option(value_flags[i].first, values[i], value_flags[i].second)
                          ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast));

  std::string config_path;
  app.add_option("--config", config_path, "Config file of `key = value` lines; flags override it");
  bool timing = false;
  auto* timing_opt = app.add_flag("--timing", timing, "Record wall-clock times in trials.csv");
  bool no_cip_tar = false;
  auto* no_cip_tar_opt = app.add_flag("--no-cip-tar", no_cip_tar, "Leave FT-CIP-Tar out of the MASFT suite");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Do not print the summary table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  SimConfig cfg;
  try {
    std::vector<std::pair<std::string, std::string>> kv;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
      kv = io::parse_key_values(in);
    }
    for (std::size_t i = 0; i < value_flags.size(); ++i)
      if (options[i]->count()) kv.emplace_back(value_flags[i].first.substr(2), values[i]);
    if (timing_opt->count()) kv.emplace_back("timing", timing ? "true" : "false");
    if (no_cip_tar_opt->count()) kv.emplace_back("include_cip_tar", no_cip_tar ? "false" : "true");
    cfg = resolve_config(kv);
    validate(cfg);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    const auto table = run_simulation(cfg);
    write_outputs(table);
    if (!quiet) {
      out << "method,mean,std,n_trials\n";
      for (const auto& row : table.summary())
        out << row.method << ',' << io::fmt(row.mean) << ',' << io::fmt(row.std) << ',' << row.n_trials << '\n';
      out << "wrote " << cfg.out_path << "/{trials.csv,summary.csv,masft.csv,run.meta}\n";
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace ssda
