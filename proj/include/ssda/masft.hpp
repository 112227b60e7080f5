#pragma once

// Multi adaptive-start fine-tuning: fit several fine-tuned candidates from
// different starting points and keep the one with the lowest hold-out risk.

#include "ssda/estimators.hpp"
#include "ssda/finetune.hpp"
#include "ssda/io.hpp"
#include "ssda/types.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ssda {

inline double empirical_risk(const LinearPredictor& pred, const Dataset& data) { return empirical_risk(pred.beta, data); }

/// Everything one trial observes.
struct TrialData {
  std::vector<Dataset> src_labeled;
  std::vector<Dataset> src_unlabeled;
  Dataset tar_labeled;
  std::optional<Dataset> tar_unlabeled;
  Dataset val;

  int num_sources() const { return static_cast<int>(src_labeled.size()); }
  Index dim() const { return tar_labeled.dim(); }
};

struct SuiteConfig {
  int r_dip = 1;              // DIP rank; ignored when r_dip_grid is non-empty
  std::vector<int> r_dip_grid;  // tune the DIP rank on validation risk
  int r_cip = 1;              // clipped to M - 1
  double rho = kInf;
  int lambda_count = 20;
  double lambda_lo = 1e-4;
  double lambda_hi = 1e2;
  bool include_cip_tar = true;
};

struct Candidate {
  std::string name;
  std::string method;  // FT-DIP, FT-OLS-Src, FT-CIP, FT-CIP-Tar
  int source = 0;      // 1..M, 0 for pooled candidates
  LinearPredictor predictor;
  bool failed = false;
  std::string error;
};

struct CandidateSuite {
  std::vector<Candidate> candidates;

  std::size_t size() const { return candidates.size(); }
  const Candidate* find(const std::string& name) const {
    for (const auto& c : candidates)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace detail {

inline Candidate run_candidate(std::string name, std::string method, int source,
                               const std::function<LinearPredictor()>& fit) {
  Candidate c;
  c.name = std::move(name);
  c.method = std::move(method);
  c.source = source;
  try {
    c.predictor = fit();
    c.predictor.name = c.name;
    if (!c.predictor.finite()) {
      c.failed = true;
      c.error = "non-finite coefficients";
    }
  } catch (const std::exception& e) {
    c.failed = true;
    c.error = e.what();
  }
  return c;
}

}  // namespace detail

/// Fits one DIP + FT-DIP pair for source m (1-based), tuning the rank when a
/// grid is configured.
inline LinearPredictor fit_ft_dip(const TrialData& data, int m, const SuiteConfig& cfg,
                                  LinearPredictor* dip_out = nullptr) {
  require(data.tar_unlabeled.has_value(), "FT-DIP needs unlabeled target data");
  const auto& sl = data.src_labeled.at(static_cast<std::size_t>(m - 1));
  const auto& su = data.src_unlabeled.at(static_cast<std::size_t>(m - 1));
  std::vector<int> ranks = cfg.r_dip_grid.empty() ? std::vector<int>{cfg.r_dip} : cfg.r_dip_grid;
  LinearPredictor best, best_dip;
  double best_risk = kInf;
  for (int r : ranks) {
    auto dip = dip_cov_fit(sl, su, *data.tar_unlabeled, r);
    auto ft = ft_dip(dip, data.tar_labeled, *data.tar_unlabeled, cfg.rho);
    const double risk = ranks.size() > 1 ? empirical_risk(ft, data.val) : 0.0;
    if (best.beta.size() == 0 || risk < best_risk) {
      best = std::move(ft);
      best_dip = std::move(dip);
      best_risk = risk;
    }
  }
  if (dip_out) *dip_out = best_dip;
  return best;
}

inline int clipped_cip_rank(const TrialData& data, const SuiteConfig& cfg) {
  return std::clamp(cfg.r_cip, 0, data.num_sources() - 1);
}

/// Order: FT-DIP-1..M, FT-OLS-Src-1..M, FT-CIP, FT-CIP-Tar.
inline CandidateSuite build_candidate_suite(const TrialData& data, const SuiteConfig& cfg) {
  const int m_sources = data.num_sources();
  require(m_sources >= 1, "candidate suite needs at least one source");
  require(static_cast<int>(data.src_unlabeled.size()) == m_sources, "each source needs an unlabeled block");
  CandidateSuite suite;
  for (int m = 1; m <= m_sources; ++m)
    suite.candidates.push_back(detail::run_candidate("FT-DIP-" + std::to_string(m), "FT-DIP", m,
                                                     [&] { return fit_ft_dip(data, m, cfg); }));
  const auto grid = lambda_grid(data.tar_labeled, cfg.lambda_count, cfg.lambda_lo, cfg.lambda_hi);
  for (int m = 1; m <= m_sources; ++m)
    suite.candidates.push_back(detail::run_candidate("FT-OLS-Src-" + std::to_string(m), "FT-OLS-Src", m, [&] {
      const auto ls = ols_fit(data.src_labeled[static_cast<std::size_t>(m - 1)], "OLS-Src");
      return tune_ft_ols(ls, data.tar_labeled, data.val, AnchoredPenalty::Norm::L1, grid);
    }));
  if (m_sources >= 2) {
    std::optional<LinearPredictor> cip;
    auto get_cip = [&]() -> const LinearPredictor& {
      if (!cip) cip = cip_mean_fit(data.src_labeled, clipped_cip_rank(data, cfg));
      return *cip;
    };
    suite.candidates.push_back(detail::run_candidate("FT-CIP", "FT-CIP", 0, [&] {
      return ft_cip(get_cip(), data.src_unlabeled.front(), data.tar_labeled, cfg.rho);
    }));
    if (cfg.include_cip_tar && data.tar_unlabeled)
      suite.candidates.push_back(detail::run_candidate("FT-CIP-Tar", "FT-CIP-Tar", 0, [&] {
        return ft_cip_tar(get_cip(), *data.tar_unlabeled, data.tar_labeled, cfg.rho);
      }));
  }
  return suite;
}

struct SelectionReport {
  std::size_t index = 0;  // 0-based position in the suite
  LinearPredictor predictor;
  std::vector<std::string> names;
  std::vector<double> risks;  // +inf for failed candidates
};

/// Lowest validation risk; ties go to the earliest candidate.
inline SelectionReport masft_select(const CandidateSuite& suite, const Dataset& val) {
  require(!suite.candidates.empty(), "masft_select: empty candidate suite");
  SelectionReport rep;
  double best = kInf;
  bool found = false;
  for (std::size_t i = 0; i < suite.candidates.size(); ++i) {
    const auto& c = suite.candidates[i];
    double risk = kInf;
    if (!c.failed) {
      risk = empirical_risk(c.predictor, val);
      if (!std::isfinite(risk)) risk = kInf;
    }
    rep.names.push_back(c.name);
    rep.risks.push_back(risk);
    if (!found || risk < best) {
      best = risk;
      rep.index = i;
      found = true;
    }
  }
  rep.predictor = suite.candidates[rep.index].predictor;
  return rep;
}

/// CSV: candidate,val_risk,selected
inline void write_selection_csv(std::ostream& out, const SelectionReport& rep, bool header = true) {
  if (header) out << "candidate,val_risk,selected\n";
  for (std::size_t i = 0; i < rep.names.size(); ++i)
    out << rep.names[i] << ',' << io::fmt(rep.risks[i]) << ',' << (i == rep.index ? 1 : 0) << '\n';
}

}  // namespace ssda
