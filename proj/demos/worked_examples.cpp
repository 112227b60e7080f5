// Prints the population estimators for the two three-variable worked examples.

#include "ssda/ssda.hpp"

#include <iostream>

namespace {

void show(const char* label, const ssda::Vector& v, double scale) {
  std::cout << "  " << label << " = (1/" << scale << ") [";
  for (ssda::Index i = 0; i < v.size(); ++i) std::cout << (i ? ", " : "") << v(i) * scale;
  std::cout << "]\n";
}

}  // namespace

int main() {
  using namespace ssda;

  const auto ex3 = example3_environment();
  std::cout << "connectivity shift on X_1:\n";
  show("beta_LS (source)", ols_population(ex3.sources.front()).beta, 4);
  show("beta_star       ", oracle_population(ex3.target).beta, 4);

  const auto ex4 = example4_environment();
  std::cout << "additive mean shift:\n";
  show("beta_DIP (mean) ", dip_mean_population(ex4).beta, 272);
  show("beta_star       ", oracle_population(ex4.target).beta, 4);
  const auto src = population_moments(ex4.sources.front());
  const auto tar = population_moments(ex4.target);
  show("v_DIP           ", tar.sigma_x.llt().solve(src.mean_x - tar.mean_x), 12);
  return 0;
}
