#pragma once

// Unsupervised baselines: OLS (single source, target, pooled), DIP-cov,
// mean-matching DIP, CIP-mean and the oracle. Every estimator comes in a
// finite-sample form and a form that consumes exact moments; both share the
// constrained solve below.

#include "ssda/io.hpp"
#include "ssda/scm.hpp"
#include "ssda/subspace.hpp"
#include "ssda/types.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace ssda {

namespace detail {

/// Solves A x = b for symmetric PSD A by Cholesky. On failure adds
/// 1e-10 * trace(A) / k to the diagonal, retries, and flags `jitter`.
inline Vector solve_psd(const Matrix& a, const Vector& b, PredictorMeta* meta) {
  const Index k = a.rows();
  if (k == 0) return Vector(0);
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) {
    Vector x = llt.solve(b);
    if (x.allFinite()) return x;
  }
  const double eps = 1e-10 * std::max(a.trace(), 1e-300) / static_cast<double>(k);
  if (meta) meta->flag("jitter");
  Matrix aj = a;
  aj.diagonal().array() += eps;
  Eigen::LDLT<Matrix> ldlt(aj);
  return ldlt.solve(b);
}

/// Minimum-norm least squares of y on x with cutoff 1e-10 * σ_max.
inline Vector min_norm_lstsq(const Matrix& x, const Vector& y, PredictorMeta* meta) {
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cut = s.size() ? 1e-10 * s(0) : 0.0;
  Vector coef = Vector::Zero(x.cols());
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) <= cut || s(i) == 0.0) continue;
    coef += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(y) / s(i));
    ++rank;
  }
  if (meta) {
    meta->scalars["rank"] = static_cast<double>(rank);
    if (rank < x.cols()) meta->flag("rank_deficient");
  }
  return coef;
}

/// argmin βᵀSβ - 2βᵀg over β ∈ span(q), via β = q u.
inline Vector constrained_ls(const Moments& m, const Matrix& q, PredictorMeta* meta) {
  if (q.cols() == 0) return Vector::Zero(m.sxy.size());
  const Matrix inner = q.transpose() * m.sxx * q;
  const Vector u = solve_psd(0.5 * (inner + inner.transpose()), q.transpose() * m.sxy, meta);
  return q * u;
}

inline Moments pooled_moments(const std::vector<Moments>& parts) {
  require(!parts.empty(), "pooled moments need at least one domain");
  Moments out{Matrix::Zero(parts[0].sxx.rows(), parts[0].sxx.cols()), Vector::Zero(parts[0].sxy.size())};
  for (const auto& p : parts) {
    require(p.sxy.size() == out.sxy.size(), "pooled domains must share dimension");
    out.sxx += p.sxx;
    out.sxy += p.sxy;
  }
  const double m = static_cast<double>(parts.size());
  out.sxx /= m;
  out.sxy /= m;
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------- OLS

inline LinearPredictor ols_fit(const Dataset& data, std::string name = "OLS") {
  validate(data);
  LinearPredictor p;
  p.name = std::move(name);
  p.beta = detail::min_norm_lstsq(data.x, labels(data), &p.meta);
  p.meta.scalars["n"] = static_cast<double>(data.rows());
  return p;
}

/// Uniformly weighted per-domain risks: (1/M) Σ_m (1/n_m) ‖Y_m - X_m β‖².
inline LinearPredictor ols_pool_fit(const std::vector<Dataset>& datasets, std::string name = "OLS-Pool") {
  require(!datasets.empty(), "ols_pool_fit: need at least one dataset");
  const Index d = datasets.front().dim();
  Index total = 0;
  for (const auto& ds : datasets) {
    validate(ds);
    labels(ds);
    require(ds.dim() == d, "ols_pool_fit: dimension mismatch across datasets");
    total += ds.rows();
  }
  // Stacking rows scaled by 1/sqrt(M n_m) reproduces the weighted objective.
  Matrix x(total, d);
  Vector y(total);
  Index at = 0;
  const double m = static_cast<double>(datasets.size());
  for (const auto& ds : datasets) {
    const double w = 1.0 / std::sqrt(m * static_cast<double>(ds.rows()));
    x.middleRows(at, ds.rows()) = w * ds.x;
    y.segment(at, ds.rows()) = w * *ds.y;
    at += ds.rows();
  }
  LinearPredictor p;
  p.name = std::move(name);
  p.beta = detail::min_norm_lstsq(x, y, &p.meta);
  p.meta.scalars["domains"] = m;
  return p;
}

/// Least squares from moments: S β = g.
inline LinearPredictor ols_moments(const Moments& m, std::string name = "OLS") {
  LinearPredictor p;
  p.name = std::move(name);
  p.beta = detail::solve_psd(m.sxx, m.sxy, &p.meta);
  return p;
}

/// Population OLS of one domain (β_LS^(m)).
inline LinearPredictor ols_population(const DomainParams& params, std::string name = "OLS") {
  return ols_moments(population_moments(params).as_moments(), std::move(name));
}

// ---------------------------------------------------------------- oracle

/// β* for an unconfounded, mean-free domain:
/// ν² / (1 + ν² bᵀΣ_ε⁻¹b) · (I - B)ᵀ Σ_ε⁻¹ b.
inline Vector oracle_closed_form(const DomainParams& t) {
  const Index d = t.dim();
  const Vector se_b = t.noise_cov_x.llt().solve(t.weights);
  const double nu2 = t.noise_var_y;
  const double scale = nu2 / (1.0 + nu2 * t.weights.dot(se_b));
  return scale * (Matrix::Identity(d, d) - t.connectivity).transpose() * se_b;
}

inline LinearPredictor oracle_population(const DomainParams& target) {
  validate(target);
  LinearPredictor p = ols_population(target, "Oracle");
  if (!target.confounder && !target.mean_shift) {
    const Vector alt = oracle_closed_form(target);
    const double resid = (alt - p.beta).cwiseAbs().maxCoeff();
    p.meta.scalars["route_residual"] = resid;
    if (resid > 1e-9 * (1.0 + p.beta.cwiseAbs().maxCoeff())) p.meta.flag("route_mismatch");
  }
  return p;
}

// ---------------------------------------------------------------- DIP

/// DIP-cov from moments: V̂ = top-|λ| eigvecs of Σ0 - Σ1, β = Q(QᵀSQ)⁻¹Qᵀg.
inline LinearPredictor dip_from_moments(const Moments& src, const Matrix& sigma_src, const Matrix& sigma_tar, int r,
                                        std::string name = "DIP") {
  const Index d = src.sxy.size();
  require(r >= 0 && r < d, "DIP: need 0 <= r < d");
  const OrthoBasis v = top_abs_eigvecs(sigma_tar - sigma_src, r);
  const OrthoBasis q = orthonormal_complement(v);
  LinearPredictor p;
  p.name = std::move(name);
  p.beta = detail::constrained_ls(src, q.cols, &p.meta);
  p.meta.v_hat = v.cols;
  p.meta.sigma_target = sigma_tar;
  p.meta.scalars["r"] = r;
  p.meta.scalars["eig_gap"] = v.gap;
  return p;
}

inline LinearPredictor dip_cov_fit(const Dataset& src_labeled, const Dataset& src_unlabeled, const Dataset& tar_unlabeled,
                                   int r, std::string name = "DIP") {
  require(src_labeled.dim() == src_unlabeled.dim() && src_labeled.dim() == tar_unlabeled.dim(),
          "dip_cov_fit: dimension mismatch");
  return dip_from_moments(sample_moments(src_labeled), second_moment(src_unlabeled), second_moment(tar_unlabeled), r,
                          std::move(name));
}

/// Population DIP-cov against the first source. Also checks
/// β_DIP = (I - Σ0⁻¹V(VᵀΣ0⁻¹V)⁻¹Vᵀ) β* and records the residual.
inline LinearPredictor dip_population(const EnvironmentSet& env, int source = 1, int r = -1) {
  if (r < 0) r = env.intervention.rank;
  const auto src = population_moments(env.domain(source));
  const auto tar = population_moments(env.target);
  LinearPredictor p = dip_from_moments(src.as_moments(), src.sigma_x, tar.sigma_x, r);

  if (r > 0 && source == 1 && env.intervention.kind == Intervention::Kind::CA) {
    const Vector beta_star = ols_moments(tar.as_moments()).beta;
    const Matrix& v = *p.meta.v_hat;
    Eigen::LLT<Matrix> s0(tar.sigma_x);
    const Matrix s0v = s0.solve(v);
    const Matrix inner = v.transpose() * s0v;
    const Vector predicted = beta_star - s0v * inner.llt().solve(v.transpose() * beta_star);
    p.meta.scalars["identity_residual"] = (predicted - p.beta).norm();
  }
  return p;
}

/// Mean-matching DIP with the single constraint βᵀ(E X1 - E X0) = 0 on the
/// first source's uncentered moments.
inline LinearPredictor dip_mean_population(const EnvironmentSet& env) {
  const auto src = population_moments(env.sources.front());
  const auto tar = population_moments(env.target);
  const Vector a = src.mean_x - tar.mean_x;
  LinearPredictor p;
  p.name = "DIP-mean";
  if (a.norm() == 0.0) {
    p = ols_moments(src.as_moments(), "DIP-mean");
    p.meta.flag("no_mean_shift");
    return p;
  }
  OrthoBasis v;
  v.cols = a.normalized();
  const OrthoBasis q = orthonormal_complement(v);
  p.beta = detail::constrained_ls(src.as_moments(), q.cols, &p.meta);
  p.meta.v_hat = v.cols;
  return p;
}

// ---------------------------------------------------------------- CIP

/// ŵ = XᵀY / ‖Y‖², the regression of X on Y (estimates H b).
inline Vector anticausal_regress(const Dataset& data) {
  validate(data);
  const Vector& y = labels(data);
  const double yy = y.squaredNorm();
  require(yy > 0.0, "anticausal_regress: labels are identically zero");
  return data.x.transpose() * y / yy;
}

namespace detail {

/// Columns ŵ^(m+1) - ŵ^(m), m = 1..M-1.
inline Matrix consecutive_differences(const std::vector<Vector>& w) {
  const Index d = w.front().size();
  Matrix p(d, static_cast<Index>(w.size()) - 1);
  for (std::size_t m = 1; m < w.size(); ++m) p.col(static_cast<Index>(m) - 1) = w[m] - w[m - 1];
  return p;
}

inline LinearPredictor cip_from_parts(const std::vector<Vector>& w, const Moments& pooled, int r, std::string name) {
  require(w.size() >= 2, "CIP needs at least two source domains");
  require(r >= 0 && r <= static_cast<int>(w.size()) - 1, "CIP: need 0 <= r <= M - 1");
  const OrthoBasis v = top_left_singvecs(consecutive_differences(w), r);
  const OrthoBasis q = orthonormal_complement(v);
  LinearPredictor p;
  p.name = std::move(name);
  p.beta = constrained_ls(pooled, q.cols, &p.meta);
  p.meta.v_hat = v.cols;
  p.meta.w_first_source = w.front();
  p.meta.w_per_source = w;
  p.meta.scalars["r"] = r;
  p.meta.scalars["sv_gap"] = v.gap;
  if (r > 0 && v.gap <= 1e-12 * (1.0 + v.values(0))) p.meta.flag("degenerate_gap");
  return p;
}

}  // namespace detail

/// CIP-mean. Each source is split by index: rows [0, n/2) estimate the
/// subspace, the rest (including an odd extra row) enter the pooled risk.
inline LinearPredictor cip_mean_fit(const std::vector<Dataset>& sources, int r, std::string name = "CIP") {
  require(sources.size() >= 2, "cip_mean_fit: need at least two source datasets");
  std::vector<Vector> w;
  std::vector<Moments> parts;
  for (const auto& ds : sources) {
    validate(ds);
    require(ds.rows() >= 2, "cip_mean_fit: each source needs at least two rows");
    require(ds.dim() == sources.front().dim(), "cip_mean_fit: dimension mismatch");
    const Index half = ds.rows() / 2;
    w.push_back(anticausal_regress(ds.slice(0, half)));
    parts.push_back(sample_moments(ds.slice(half, ds.rows() - half)));
  }
  LinearPredictor p = detail::cip_from_parts(w, detail::pooled_moments(parts), r, std::move(name));
  p.meta.flag("split_first_half_subspace");
  return p;
}

/// Population CIP-mean using exact H b^(m) and pooled exact moments.
inline LinearPredictor cip_population(const EnvironmentSet& env, int r = -1) {
  if (r < 0) r = env.intervention.rank;
  std::vector<Vector> w;
  std::vector<Moments> parts;
  for (const auto& s : env.sources) {
    const auto pm = population_moments(s);
    w.push_back(pm.exy / pm.var_y);
    parts.push_back(pm.as_moments());
  }
  return detail::cip_from_parts(w, detail::pooled_moments(parts), r, "CIP");
}

/// CSV line: name, then the coefficients.
inline void write_predictor_csv(std::ostream& out, const LinearPredictor& p) {
  out << p.name;
  for (Index i = 0; i < p.beta.size(); ++i) out << ',' << io::fmt(p.beta(i));
  out << '\n';
}

}  // namespace ssda
