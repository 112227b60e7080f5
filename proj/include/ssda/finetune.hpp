#pragma once

// Fine-tuning on labeled target data.
//
// Subspace methods (FT-DIP, FT-CIP, FT-CIP-Tar) search β = β₀ + Σ̂⁻¹V̂α with an
// optional cap ‖V̂ᵀΣ̂β‖ ≤ ϱ. FT-OLS-Src penalises the distance to the source
// OLS fit in ℓ1 or squared ℓ2, inside the ball ‖β‖ ≤ ρ.

#include "ssda/estimators.hpp"
#include "ssda/scm.hpp"
#include "ssda/subspace.hpp"
#include "ssda/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ssda {

struct SubspaceConstraint {
  OrthoBasis v_hat;
  OrthoBasis q_hat;
  Matrix sigma_hat;
  LinearPredictor anchor;
  double rho = kInf;

  Index dim() const { return sigma_hat.rows(); }
};

/// Builds (V̂, Q̂) from a basis, checks shapes.
inline SubspaceConstraint make_constraint(const Matrix& v, Matrix sigma, LinearPredictor anchor, double rho = kInf) {
  require(rho > 0.0, "fine-tuning cap rho must be positive");
  require(sigma.rows() == sigma.cols() && sigma.rows() == v.rows(), "constraint: sigma and basis disagree on d");
  require(anchor.beta.size() == v.rows(), "constraint: anchor has the wrong length");
  SubspaceConstraint c;
  c.v_hat.cols = v;
  c.q_hat = orthonormal_complement(c.v_hat);
  c.sigma_hat = 0.5 * (sigma + sigma.transpose());
  c.anchor = std::move(anchor);
  c.rho = rho;
  return c;
}

struct AnchoredPenalty {
  enum class Norm { L1, L2 };
  LinearPredictor anchor;
  double lambda = 0.0;
  Norm norm = Norm::L1;
  double ball_rho = kInf;
};

namespace detail {

/// Σ̂⁻¹ M with the same jitter policy as solve_psd.
inline Matrix solve_psd_multi(const Matrix& a, const Matrix& b, PredictorMeta* meta) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  if (meta) meta->flag("jitter");
  Matrix aj = a;
  aj.diagonal().array() += 1e-10 * std::max(a.trace(), 1e-300) / static_cast<double>(a.rows());
  return aj.ldlt().solve(b);
}

struct CapSolution {
  Vector u;
  double multiplier = 0.0;
  bool active = false;
  int iterations = 0;
};

/// min (u - c0)ᵀG(u - c0) - 2hᵀ(u - c0)  s.t. ‖u‖ ≤ rho, by bisection on the
/// multiplier μ in (G + μI)u = G c0 + h.
inline CapSolution capped_quadratic(const Matrix& g, const Vector& c0, const Vector& h, double rho,
                                    PredictorMeta* meta) {
  const Index r = g.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (g + g.transpose()));
  Vector lam = es.eigenvalues().cwiseMax(0.0);
  const Matrix& e = es.eigenvectors();
  const Vector rhs = g * c0 + h;
  const Vector rhs_e = e.transpose() * rhs;

  const double top = lam.size() ? lam.maxCoeff() : 0.0;
  const double floor = 1e-10 * std::max(top, 1e-300);
  if (lam.size() && lam.minCoeff() <= floor) {
    if (meta) meta->flag("jitter");
    lam = lam.array().max(floor);
  }

  auto u_at = [&](double mu) -> Vector { return e * (rhs_e.array() / (lam.array() + mu)).matrix(); };

  CapSolution out;
  out.u = u_at(0.0);
  if (r == 0 || !std::isfinite(rho) || out.u.norm() <= rho) return out;

  out.active = true;
  double lo = 0.0;
  double hi = rhs.norm() / rho;
  while (u_at(hi).norm() > rho) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double nrm = u_at(mid).norm();
    out.iterations = it + 1;
    if (std::abs(nrm - rho) <= 1e-10 * std::max(1.0, rho)) {
      hi = mid;
      break;
    }
    if (nrm > rho)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-300) break;
  }
  out.multiplier = hi;
  out.u = u_at(hi);
  return out;
}

}  // namespace detail

/// Core solver on target moments (S, g):
/// min βᵀSβ - 2gᵀβ over β = β₀ + Σ̂⁻¹V̂α, ‖V̂ᵀΣ̂β‖ ≤ ϱ.
inline LinearPredictor solve_subspace_moments(const Moments& target, const SubspaceConstraint& c,
                                              std::string name = "FT") {
  const Index d = c.dim();
  require(target.sxy.size() == d, "solve_subspace: dimension mismatch");
  LinearPredictor p;
  p.name = std::move(name);
  p.meta = PredictorMeta{};
  const Index r = c.v_hat.rank();
  const Vector& b0 = c.anchor.beta;
  p.meta.scalars["ft_dim"] = static_cast<double>(r);
  if (r == 0) {
    p.beta = b0;
    return p;
  }
  const Matrix m = detail::solve_psd_multi(c.sigma_hat, c.v_hat.cols, &p.meta);  // Σ̂⁻¹V̂
  const Matrix sm = target.sxx * m;
  Matrix g = m.transpose() * sm;
  g = 0.5 * (g + g.transpose()).eval();
  const Vector h = m.transpose() * (target.sxy - target.sxx * b0);
  const Vector c0 = c.v_hat.cols.transpose() * (c.sigma_hat * b0);

  const auto sol = detail::capped_quadratic(g, c0, h, c.rho, &p.meta);
  const Vector alpha = sol.u - c0;
  p.beta = b0 + m * alpha;
  p.meta.scalars["alpha_norm"] = alpha.norm();
  p.meta.scalars["cap_active"] = sol.active ? 1.0 : 0.0;
  p.meta.scalars["multiplier"] = sol.multiplier;
  if (sol.active) p.meta.flag("cap_active");
  return p;
}

inline LinearPredictor solve_subspace_ls(const Dataset& tar_labeled, const SubspaceConstraint& c,
                                         std::string name = "FT") {
  return solve_subspace_moments(sample_moments(tar_labeled), c, std::move(name));
}

// ---------------------------------------------------------------- FT-DIP

inline LinearPredictor ft_dip(const LinearPredictor& dip, const Dataset& tar_labeled, const Dataset& tar_unlabeled,
                              double rho = kInf, std::string name = "FT-DIP") {
  require(dip.meta.v_hat.has_value(), "ft_dip: anchor carries no DIP basis");
  auto c = make_constraint(*dip.meta.v_hat, second_moment(tar_unlabeled), dip, rho);
  auto p = solve_subspace_ls(tar_labeled, c, std::move(name));
  p.meta.v_hat = dip.meta.v_hat;
  return p;
}

/// Population FT-DIP from source `source`, target moments as the objective.
inline LinearPredictor ft_dip_population(const EnvironmentSet& env, double rho = kInf, int source = 1, int r = -1) {
  const auto dip = dip_population(env, source, r);
  const auto tar = population_moments(env.target);
  return solve_subspace_moments(tar.as_moments(), make_constraint(*dip.meta.v_hat, tar.sigma_x, dip, rho), "FT-DIP");
}

// ---------------------------------------------------------------- FT-CIP

/// Orthonormal basis of span[ŵ^(1), V̂_aw]; throws when ŵ^(1) lies in span(V̂_aw).
inline Matrix augmented_basis(const Vector& w1, const Matrix& v_aw) {
  const Vector resid = w1 - v_aw * (v_aw.transpose() * w1);
  require(resid.norm() > 1e-8 * std::max(w1.norm(), 1e-300), "ft_cip: H b^(1) lies in span of V_aw");
  Matrix stacked(w1.size(), v_aw.cols() + 1);
  stacked.col(0) = w1;
  stacked.rightCols(v_aw.cols()) = v_aw;
  return orthonormalize(stacked, 1e-8).cols;
}

inline LinearPredictor ft_cip(const LinearPredictor& cip, const Dataset& src_unlabeled_1, const Dataset& tar_labeled,
                              double rho = kInf, std::string name = "FT-CIP") {
  require(cip.meta.v_hat && cip.meta.w_first_source, "ft_cip: anchor carries no CIP basis");
  const Matrix v_aug = augmented_basis(*cip.meta.w_first_source, *cip.meta.v_hat);
  return solve_subspace_ls(tar_labeled, make_constraint(v_aug, second_moment(src_unlabeled_1), cip, rho),
                           std::move(name));
}

inline LinearPredictor ft_cip_tar(const LinearPredictor& cip, const Dataset& tar_unlabeled, const Dataset& tar_labeled,
                                  double rho = kInf, std::string name = "FT-CIP-Tar") {
  require(cip.meta.v_hat.has_value(), "ft_cip_tar: anchor carries no CIP basis");
  return solve_subspace_ls(tar_labeled, make_constraint(*cip.meta.v_hat, second_moment(tar_unlabeled), cip, rho),
                           std::move(name));
}

inline LinearPredictor ft_cip_population(const EnvironmentSet& env, double rho = kInf, int r = -1) {
  const auto cip = cip_population(env, r);
  const Matrix v_aug = augmented_basis(*cip.meta.w_first_source, *cip.meta.v_hat);
  const auto src = population_moments(env.sources.front());
  const auto tar = population_moments(env.target);
  return solve_subspace_moments(tar.as_moments(), make_constraint(v_aug, src.sigma_x, cip, rho), "FT-CIP");
}

inline LinearPredictor ft_cip_tar_population(const EnvironmentSet& env, double rho = kInf, int r = -1) {
  const auto cip = cip_population(env, r);
  const auto tar = population_moments(env.target);
  return solve_subspace_moments(tar.as_moments(), make_constraint(*cip.meta.v_hat, tar.sigma_x, cip, rho),
                                "FT-CIP-Tar");
}

// ---------------------------------------------------------------- FT-OLS-Src

namespace detail {

/// argmin_x ½‖x - z‖² + t‖x - a‖₁  s.t. ‖x‖ ≤ rho.
/// With multiplier ν for the ball: x = a + soft(z/(1+ν) - a, t/(1+ν)).
inline Vector prox_l1_ball(const Vector& z, const Vector& a, double t, double rho) {
  auto at = [&](double nu) {
    const double s = 1.0 + nu;
    const Vector shifted = z / s - a;
    const double th = t / s;
    return Vector(a + (shifted.array().sign() * (shifted.array().abs() - th).max(0.0)).matrix());
  };
  Vector x = at(0.0);
  if (!std::isfinite(rho) || x.norm() <= rho) return x;
  double lo = 0.0, hi = 1.0;
  while (at(hi).norm() > rho) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (at(mid).norm() > rho)
      lo = mid;
    else
      hi = mid;
  }
  return at(hi);
}

inline LinearPredictor ft_l1_moments(const Moments& m, const Vector& anchor, double lambda, double rho,
                                     const Vector* warm, std::string name) {
  LinearPredictor p;
  p.name = std::move(name);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.sxx, Eigen::EigenvaluesOnly);
  const double lip = std::max(2.0 * es.eigenvalues().maxCoeff(), 1e-300);
  const double step = 1.0 / lip;

  auto grad = [&](const Vector& b) -> Vector { return 2.0 * (m.sxx * b - m.sxy); };
  auto objective = [&](const Vector& b) { return b.dot(m.sxx * b) - 2.0 * m.sxy.dot(b) + lambda * (b - anchor).lpNorm<1>(); };

  Vector x = warm ? *warm : anchor;
  if (std::isfinite(rho) && x.norm() > rho) x *= rho / x.norm();
  Vector y = x;
  double t = 1.0;
  double f_prev = objective(x);
  bool converged = false;
  int it = 0;
  for (; it < 10000; ++it) {
    const Vector next = prox_l1_ball(y - step * grad(y), anchor, step * lambda, rho);
    const double f_next = objective(next);
    const double change = (next - x).cwiseAbs().maxCoeff();
    if (f_next > f_prev && t > 1.0) {
      // Adaptive restart: drop momentum when the objective goes up. A plain
      // step from x is monotone, so a rise right after a restart is rounding.
      t = 1.0;
      y = x;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - x);
    x = next;
    t = t_next;
    f_prev = f_next;
    if (change < 1e-9) {
      converged = true;
      break;
    }
  }
  p.beta = x;
  p.meta.scalars["iterations"] = it;
  if (!converged) p.meta.flag("not_converged");
  return p;
}

/// (S + λI + νI) β = g + λa with ν ≥ 0 chosen so ‖β‖ ≤ rho.
inline LinearPredictor ft_l2_moments(const Moments& m, const Vector& anchor, double lambda, double rho,
                                     std::string name) {
  LinearPredictor p;
  p.name = std::move(name);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.sxx);
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  const Matrix& e = es.eigenvectors();
  const Vector rhs_e = e.transpose() * (m.sxy + lambda * anchor);
  const double floor = 1e-10 * std::max(lam.maxCoeff(), 1e-300);
  auto at = [&](double nu) -> Vector {
    Vector denom = (lam.array() + lambda + nu).matrix();
    if (denom.minCoeff() <= floor) {
      p.meta.flag("jitter");
      denom = denom.cwiseMax(floor);
    }
    return e * rhs_e.cwiseQuotient(denom);
  };
  Vector b = at(0.0);
  if (std::isfinite(rho) && b.norm() > rho) {
    double lo = 0.0, hi = std::max(1.0, rhs_e.norm() / rho);
    while (at(hi).norm() > rho) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double nrm = at(mid).norm();
      if (std::abs(nrm - rho) <= 1e-12 * rho) {
        hi = mid;
        break;
      }
      if (nrm > rho)
        lo = mid;
      else
        hi = mid;
    }
    b = at(hi);
    p.meta.flag("ball_active");
    p.meta.scalars["multiplier"] = hi;
  }
  p.beta = b;
  return p;
}

}  // namespace detail

/// FT-OLS-Src: min (1/n)‖Y - Xβ‖² + λ pen(β - β̂_LS) s.t. ‖β‖ ≤ ρ.
/// pen is ‖·‖₁ (proximal gradient) or ‖·‖₂² (closed form).
inline LinearPredictor ft_ols_anchored(const LinearPredictor& ls, const Dataset& tar_labeled, const AnchoredPenalty& pen,
                                       const Vector* warm = nullptr, std::string name = "") {
  require(pen.lambda >= 0.0, "ft_ols_anchored: lambda must be nonnegative");
  require(pen.ball_rho > 0.0, "ft_ols_anchored: ball radius must be positive");
  require(ls.beta.size() == tar_labeled.dim(), "ft_ols_anchored: anchor has the wrong length");
  if (name.empty()) name = pen.norm == AnchoredPenalty::Norm::L1 ? "FT-OLS-L1" : "FT-OLS-L2";

  LinearPredictor p;
  if (pen.lambda == 0.0 && !std::isfinite(pen.ball_rho)) {
    p = ols_fit(tar_labeled, name);
  } else {
    const Moments m = sample_moments(tar_labeled);
    p = pen.norm == AnchoredPenalty::Norm::L1 ? detail::ft_l1_moments(m, ls.beta, pen.lambda, pen.ball_rho, warm, name)
                                              : detail::ft_l2_moments(m, ls.beta, pen.lambda, pen.ball_rho, name);
  }
  p.meta.scalars["lambda"] = pen.lambda;
  return p;
}

/// Geometric grid of `count` points over [lo, hi] · ‖XᵀY‖∞ / n.
inline std::vector<double> lambda_grid(const Dataset& tar_labeled, int count = 20, double lo = 1e-4, double hi = 1e2) {
  require(count >= 1 && lo > 0.0 && hi >= lo, "lambda_grid: invalid grid specification");
  const double scale = (tar_labeled.x.transpose() * labels(tar_labeled)).cwiseAbs().maxCoeff() /
                       static_cast<double>(tar_labeled.rows());
  std::vector<double> grid;
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid.push_back(scale * lo * std::pow(hi / lo, f));
  }
  return grid;
}

/// Fits FT-OLS-Src over a λ grid and keeps the lowest validation risk
/// (ties go to the earlier grid point). Fits warm-start from the previous one.
inline LinearPredictor tune_ft_ols(const LinearPredictor& ls, const Dataset& tar_labeled, const Dataset& val,
                                   AnchoredPenalty::Norm norm, const std::vector<double>& grid, double ball_rho = kInf,
                                   std::string name = "") {
  require(!grid.empty(), "tune_ft_ols: empty lambda grid");
  LinearPredictor best;
  double best_risk = kInf;
  std::optional<Vector> warm;
  for (double lambda : grid) {
    AnchoredPenalty pen{ls, lambda, norm, ball_rho};
    auto p = ft_ols_anchored(ls, tar_labeled, pen, warm ? &*warm : nullptr, name);
    warm = p.beta;
    const double risk = empirical_risk(p.beta, val);
    if (risk < best_risk || best.beta.size() == 0) {
      best = std::move(p);
      best_risk = risk;
    }
  }
  best.meta.scalars["val_risk"] = best_risk;
  return best;
}

}  // namespace ssda
