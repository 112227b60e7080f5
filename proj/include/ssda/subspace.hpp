#pragma once

#include "ssda/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace ssda {

/// Matrix with orthonormal columns plus how it was obtained.
struct OrthoBasis {
  enum class Origin { EigTopAbs, SvdLeft, Complement, Gram };

  Matrix cols;
  Origin origin = Origin::Gram;
  /// |λ_r| - |λ_{r+1}| (eigen) or σ_r - σ_{r+1} (SVD); 0 when not applicable.
  double gap = 0.0;
  /// Selected |λ| or σ in decreasing order.
  Vector values;

  Index dim() const { return cols.rows(); }
  Index rank() const { return cols.cols(); }
  Matrix projector() const { return cols * cols.transpose(); }
};

namespace detail {

inline constexpr double kSignTol = 1e-12;
inline constexpr double kTieTol = 1e-12;

/// Flip each column so its first entry with |x| > 1e-12 is positive.
inline void fix_signs(Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > kSignTol) {
        if (m(i, j) < 0) m.col(j) *= -1.0;
        break;
      }
}

}  // namespace detail

/// Eigenvectors for the r eigenvalues of largest magnitude, ordered by
/// decreasing |λ|. Ties within 1e-12 keep the solver's index order.
inline OrthoBasis top_abs_eigvecs(const Matrix& a, int r) {
  require(a.rows() == a.cols(), "top_abs_eigvecs: matrix must be square");
  const Index d = a.rows();
  require(r >= 0 && r <= d, "top_abs_eigvecs: need 0 <= r <= d");

  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw Error("top_abs_eigvecs: eigen-solver failed");

  const Vector mag = es.eigenvalues().cwiseAbs();
  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) {
    if (std::abs(mag(i) - mag(j)) <= detail::kTieTol) return false;
    return mag(i) > mag(j);
  });

  OrthoBasis out;
  out.origin = OrthoBasis::Origin::EigTopAbs;
  out.cols.resize(d, r);
  out.values.resize(r);
  for (int k = 0; k < r; ++k) {
    const Index idx = order[static_cast<std::size_t>(k)];
    out.cols.col(k) = es.eigenvectors().col(idx);
    out.values(k) = mag(idx);
  }
  detail::fix_signs(out.cols);
  if (r >= 1) {
    const double next = r < d ? mag(order[static_cast<std::size_t>(r)]) : 0.0;
    out.gap = out.values(r - 1) - next;
  }
  return out;
}

/// Orthonormal basis of the orthogonal complement of span(v).
inline OrthoBasis orthonormal_complement(const OrthoBasis& v) {
  const Index d = v.dim();
  const Index k = v.rank();
  OrthoBasis out;
  out.origin = OrthoBasis::Origin::Complement;
  if (k == 0) {
    out.cols = Matrix::Identity(d, d);
    return out;
  }
  Eigen::HouseholderQR<Matrix> qr(v.cols);
  const Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  out.cols = q.rightCols(d - k);
  detail::fix_signs(out.cols);
  return out;
}

/// Left singular vectors of the r largest singular values of p.
inline OrthoBasis top_left_singvecs(const Matrix& p, int r) {
  const Index d = p.rows();
  const Index k = p.cols();
  require(r >= 0 && r <= std::min(d, k), "top_left_singvecs: need 0 <= r <= min(d, k)");
  OrthoBasis out;
  out.origin = OrthoBasis::Origin::SvdLeft;
  out.cols.resize(d, r);
  out.values.resize(r);
  if (r == 0) return out;

  Eigen::JacobiSVD<Matrix> svd(p, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  out.cols = svd.matrixU().leftCols(r);
  out.values = s.head(r);
  detail::fix_signs(out.cols);
  const double next = r < s.size() ? s(r) : 0.0;
  out.gap = s(r - 1) - next;
  return out;
}

/// Orthonormal basis of span(m) by Gram-Schmidt with re-orthogonalisation.
/// Columns whose residual norm falls below tol relative to their own norm
/// are dropped.
inline OrthoBasis orthonormalize(const Matrix& m, double tol = 1e-10) {
  OrthoBasis out;
  out.origin = OrthoBasis::Origin::Gram;
  out.cols.resize(m.rows(), 0);
  std::vector<Vector> kept;
  for (Index j = 0; j < m.cols(); ++j) {
    Vector v = m.col(j);
    const double n0 = v.norm();
    if (n0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : kept) v -= u.dot(v) * u;
    if (v.norm() <= tol * n0) continue;
    kept.push_back(v.normalized());
  }
  out.cols.resize(m.rows(), static_cast<Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) out.cols.col(static_cast<Index>(j)) = kept[j];
  return out;
}

/// ‖UUᵀ - VVᵀ‖_op.
inline double subspace_distance(const Matrix& u, const Matrix& v) {
  const Matrix diff = u * u.transpose() - v * v.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (diff + diff.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace ssda
