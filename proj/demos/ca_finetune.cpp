// One CA-shift trial at a small scale: DIP, FT-DIP and target-only OLS.

#include "ssda/ssda.hpp"

#include <iostream>

int main(int argc, char** argv) {
  using namespace ssda;
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 7;
  const int d = 20, r = 2;

  const auto env = make_ca_environments(d, r, 1, seed);
  const auto& src = env.sources.front();
  const auto src_l = sample_labeled(src, 5000, derive_seed(seed, 0, 1, Role::Labeled), 1);
  const auto src_u = sample_unlabeled(src, 5000, derive_seed(seed, 0, 1, Role::Unlabeled), 1);
  const auto tar_l = sample_labeled(env.target, 60, derive_seed(seed, 0, 0, Role::Labeled));
  const auto tar_u = sample_unlabeled(env.target, 5000, derive_seed(seed, 0, 0, Role::Unlabeled));

  const auto dip = dip_cov_fit(src_l, src_u, tar_u, r);
  const auto ft = ft_dip(dip, tar_l, tar_u);
  const auto tar_only = ols_fit(tar_l, "OLS-Tar");

  for (const auto* p : {&dip, &ft, &tar_only})
    std::cout << p->name << ": excess risk " << excess_risk_population(*p, env.target).value << '\n';
  return 0;
}
