#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base error for all library failures (bad dimensions, failed preconditions).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid user configuration (CLI flags, config files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(what);
}

/// Labeled or unlabeled sample block from one domain.
///
/// Rows of `x` are i.i.d. draws. `domain_tag` is 0 for the target and 1..M for
/// sources. `seed` records the stream the block was drawn from.
struct Dataset {
  Matrix x;
  std::optional<Vector> y;
  int domain_tag = 0;
  std::uint64_t seed = 0;

  Index rows() const { return x.rows(); }
  Index dim() const { return x.cols(); }
  bool labeled() const { return y.has_value(); }

  /// Rows [begin, begin + count) as a new dataset with the same tag and seed.
  Dataset slice(Index begin, Index count) const {
    Dataset out;
    out.x = x.middleRows(begin, count);
    if (y) out.y = y->segment(begin, count);
    out.domain_tag = domain_tag;
    out.seed = seed;
    return out;
  }
};

inline void validate(const Dataset& d) {
  require(d.rows() >= 1, "dataset must have at least one row");
  if (d.y) require(d.y->size() == d.rows(), "dataset label count does not match row count");
}

inline const Vector& labels(const Dataset& d) {
  if (!d.y) throw Error("dataset is unlabeled but labels are required");
  return *d.y;
}

/// Free-form diagnostics attached to every fitted predictor.
///
/// Subspace estimators also stash the bases and moment matrices their
/// fine-tuning counterparts need, so a DIP or CIP fit can be handed straight to
/// the corresponding FT routine.
struct PredictorMeta {
  std::map<std::string, double> scalars;
  std::vector<std::string> flags;
  std::optional<Matrix> v_hat;          // constraint basis (DIP: V̂, CIP: V̂_aw)
  std::optional<Matrix> sigma_target;   // Σ̂_X^(0) used to build V̂ (DIP)
  std::optional<Vector> w_first_source; // estimate of H b^(1) (CIP)
  std::vector<Vector> w_per_source;     // per-source estimates of H b^(m) (CIP)

  bool has_flag(const std::string& f) const {
    for (const auto& g : flags)
      if (g == f) return true;
    return false;
  }
  void flag(const std::string& f) {
    if (!has_flag(f)) flags.push_back(f);
  }
};

/// A linear predictor x -> betaᵀx together with how it was produced.
struct LinearPredictor {
  std::string name;
  Vector beta;
  PredictorMeta meta;

  Index dim() const { return beta.size(); }
  bool finite() const { return beta.allFinite(); }
};

/// Second-moment summary (E[XXᵀ], E[XY]) either exact or estimated.
struct Moments {
  Matrix sxx;
  Vector sxy;
};

inline Moments sample_moments(const Dataset& d) {
  validate(d);
  const double n = static_cast<double>(d.rows());
  Moments m;
  m.sxx = (d.x.transpose() * d.x) / n;
  m.sxx = 0.5 * (m.sxx + m.sxx.transpose()).eval();
  m.sxy = (d.x.transpose() * labels(d)) / n;
  return m;
}

/// Uncentered second moment XᵀX / n.
inline Matrix second_moment(const Dataset& d) {
  validate(d);
  Matrix s = (d.x.transpose() * d.x) / static_cast<double>(d.rows());
  return 0.5 * (s + s.transpose());
}

/// (1/n) Σ (y_i - βᵀx_i)².
inline double empirical_risk(const Vector& beta, const Dataset& d) {
  validate(d);
  require(beta.size() == d.dim(), "empirical_risk: coefficient length does not match data");
  return (labels(d) - d.x * beta).squaredNorm() / static_cast<double>(d.rows());
}

}  // namespace ssda
