#include "ssda/bench.hpp"
#include "ssda/masft.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace ssda;

namespace {

Dataset make_data(const Matrix& x, const Vector& y) {
  Dataset d;
  d.x = x;
  d.y = y;
  return d;
}

Candidate candidate(std::string name, Vector beta) {
  Candidate c;
  c.name = name;
  c.method = name;
  c.predictor = {name, std::move(beta), {}};
  return c;
}

SimConfig small_ca() {
  SimConfig c = default_config(Scenario::CA);
  c.d = 8;
  c.r = 2;
  c.m_sources = 2;
  c.n_src_labeled = c.n_src_unlabeled = 600;
  c.n_tar_labeled = 20;
  c.n_tar_unlabeled = 600;
  c.n_val = 20;
  c.lambda_count = 6;
  return c;
}

}  // namespace

TEST(EmpiricalRisk, HandValues) {
  const Matrix x = Matrix::Identity(2, 2);
  EXPECT_EQ(empirical_risk(Vector::Zero(2), make_data(x, Vector::Zero(2))), 0.0);
  EXPECT_EQ(empirical_risk(Vector{{1.0, 2.0}}, make_data(x, Vector{{1.0, 2.0}})), 0.0);
  EXPECT_DOUBLE_EQ(empirical_risk(Vector::Zero(2), make_data(x, Vector{{1.0, 2.0}})), 2.5);
}

TEST(MasftSelect, PicksLowestRisk) {
  const auto val = make_data(Matrix::Identity(2, 2), Vector{{1.0, 1.0}});
  CandidateSuite s;
  s.candidates.push_back(candidate("a", Vector{{-1.0, -1.0}}));  // risk 4
  s.candidates.push_back(candidate("b", Vector{{0.0, 0.0}}));    // risk 1
  const auto rep = masft_select(s, val);
  EXPECT_EQ(rep.index, 1u);
  EXPECT_DOUBLE_EQ(rep.risks[0], 4.0);
  EXPECT_DOUBLE_EQ(rep.risks[1], 1.0);
}

TEST(MasftSelect, TiesGoToFirst) {
  const auto val = make_data(Matrix::Identity(2, 2), Vector::Zero(2));
  CandidateSuite s;
  for (const char* n : {"a", "b", "c"}) s.candidates.push_back(candidate(n, Vector::Constant(2, 1e-15)));
  EXPECT_EQ(masft_select(s, val).index, 0u);
}

TEST(MasftSelect, FailedCandidatesGetInfiniteRisk) {
  const auto val = make_data(Matrix::Identity(2, 2), Vector::Ones(2));
  CandidateSuite s;
  auto bad = candidate("bad", Vector::Ones(2));
  bad.failed = true;
  s.candidates.push_back(bad);
  s.candidates.push_back(candidate("ok", Vector::Zero(2)));
  const auto rep = masft_select(s, val);
  EXPECT_EQ(rep.index, 1u);
  EXPECT_TRUE(std::isinf(rep.risks[0]));
}

TEST(MasftSelect, EmptySuiteThrows) {
  EXPECT_THROW(masft_select(CandidateSuite{}, make_data(Matrix::Identity(1, 1), Vector::Ones(1))), Error);
}

TEST(MasftSelect, DominatedCandidateDoesNotChangePick) {
  const auto val = make_data(Matrix::Identity(2, 2), Vector{{1.0, 0.0}});
  CandidateSuite s;
  s.candidates.push_back(candidate("a", Vector{{0.5, 0.0}}));
  s.candidates.push_back(candidate("b", Vector{{0.9, 0.0}}));
  const auto before = masft_select(s, val);
  s.candidates.push_back(candidate("worse", Vector{{-5.0, 3.0}}));
  const auto after = masft_select(s, val);
  EXPECT_EQ(before.index, after.index);
}

TEST(CandidateSuite, SingleSourceHasNoCip) {
  auto cfg = small_ca();
  cfg.m_sources = 1;
  const auto env = make_environment(cfg, 1);
  const auto data = sample_trial(cfg, env, 0);
  const auto suite = build_candidate_suite(data, suite_config(cfg));
  ASSERT_EQ(suite.size(), 2u);
  EXPECT_EQ(suite.candidates[0].name, "FT-DIP-1");
  EXPECT_EQ(suite.candidates[1].name, "FT-OLS-Src-1");
}

TEST(CandidateSuite, FourSourcesOrder) {
  auto cfg = small_ca();
  cfg.m_sources = 4;
  const auto env = make_environment(cfg, 2);
  const auto data = sample_trial(cfg, env, 0);
  const auto suite = build_candidate_suite(data, suite_config(cfg));
  const std::vector<std::string> expect{"FT-DIP-1",     "FT-DIP-2",     "FT-DIP-3",     "FT-DIP-4", "FT-OLS-Src-1",
                                        "FT-OLS-Src-2", "FT-OLS-Src-3", "FT-OLS-Src-4", "FT-CIP",   "FT-CIP-Tar"};
  ASSERT_EQ(suite.size(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(suite.candidates[i].name, expect[i]);
  auto no_tar = suite_config(cfg);
  no_tar.include_cip_tar = false;
  EXPECT_EQ(build_candidate_suite(data, no_tar).size(), 9u);
}

TEST(CandidateSuite, SelectionIsArgmin) {
  const auto cfg = small_ca();
  const auto env = make_environment(cfg, 3);
  const auto data = sample_trial(cfg, env, 0);
  const auto rep = masft_select(build_candidate_suite(data, suite_config(cfg)), data.val);
  for (double r : rep.risks) EXPECT_LE(rep.risks[rep.index], r);
}

TEST(CandidateSuite, RankGridTunedOnValidation) {
  auto cfg = small_ca();
  cfg.r_dip_grid = {1, 2, 3};
  const auto env = make_environment(cfg, 4);
  const auto data = sample_trial(cfg, env, 0);
  const auto scfg = suite_config(cfg);
  const auto tuned = fit_ft_dip(data, 1, scfg);
  double best = kInf;
  for (int r : cfg.r_dip_grid) {
    auto one = scfg;
    one.r_dip_grid.clear();
    one.r_dip = r;
    best = std::min(best, empirical_risk(fit_ft_dip(data, 1, one), data.val));
  }
  EXPECT_DOUBLE_EQ(empirical_risk(tuned, data.val), best);
}

TEST(SelectionCsv, Format) {
  SelectionReport rep;
  rep.names = {"a", "b"};
  rep.risks = {2.0, 0.5};
  rep.index = 1;
  std::ostringstream o;
  write_selection_csv(o, rep);
  EXPECT_EQ(o.str(), "candidate,val_risk,selected\na,2,0\nb,0.5,1\n");
}
