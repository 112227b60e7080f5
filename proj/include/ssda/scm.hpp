#pragma once

// Anticausal linear structural causal models.
//
// Every domain follows
//
//     Y = ε_Y,          X = B X + b Y + ε_X       =>  X = H (b Y + ε_X),  H = (I - B)^-1
//
// with two optional extras: a hidden confounder Z ~ N(0, I_r) that enters the
// target as ε_X = W Z + ξ_X and ε_Y = w_Yᵀ Z + ξ_Y, and a deterministic additive
// mean μ injected next to ε_X (so E[X] = H μ). Population moments are the
// uncentered E[XXᵀ] and E[XY].

#include "ssda/io.hpp"
#include "ssda/rng.hpp"
#include "ssda/types.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace ssda {

struct Confounder {
  Matrix w;    // d x r loading on X-noise
  Vector w_y;  // r loading on Y-noise
};

struct DomainParams {
  Matrix connectivity;  // B
  Vector weights;       // b (anticausal weights Y -> X)
  Matrix noise_cov_x;   // Σ_εX
  double noise_var_y = 1.0;
  std::optional<Confounder> confounder;
  std::optional<Vector> mean_shift;

  Index dim() const { return weights.size(); }
};

/// H = (I - B)^-1.
inline Matrix mixing_matrix(const DomainParams& p) {
  const Index d = p.dim();
  return (Matrix::Identity(d, d) - p.connectivity).partialPivLu().inverse();
}

/// Throws if the parameters are not a valid domain.
inline void validate(const DomainParams& p) {
  const Index d = p.dim();
  require(d >= 1, "domain dimension must be positive");
  require(p.connectivity.rows() == d && p.connectivity.cols() == d, "connectivity must be d x d");
  require(p.noise_cov_x.rows() == d && p.noise_cov_x.cols() == d, "noise_cov_x must be d x d");
  require(p.noise_var_y > 0.0, "noise_var_y must be positive");

  Eigen::FullPivLU<Matrix> lu(Matrix::Identity(d, d) - p.connectivity);
  require(lu.isInvertible(), "I - B is singular");

  require((p.noise_cov_x - p.noise_cov_x.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + p.noise_cov_x.cwiseAbs().maxCoeff()),
          "noise_cov_x must be symmetric");
  Eigen::LLT<Matrix> llt(p.noise_cov_x);
  require(llt.info() == Eigen::Success, "noise_cov_x must be positive definite");

  if (p.confounder) {
    const auto& c = *p.confounder;
    require(c.w.rows() == d, "confounder W must have d rows");
    require(c.w_y.size() == c.w.cols(), "confounder w_Y length must equal rank of W");
    Eigen::FullPivLU<Matrix> wl(c.w);
    require(wl.rank() == c.w.cols(), "confounder W must have full column rank");
  }
  if (p.mean_shift) require(p.mean_shift->size() == d, "mean_shift must have length d");
}

struct Intervention {
  enum class Kind { CA, SC, AW, None, MeanShift };
  Kind kind = Kind::None;
  int rank = 0;              // r_ca or r_aw
  std::vector<int> support;  // SC: 0-based intervened columns
};

inline std::string to_string(Intervention::Kind k) {
  switch (k) {
    case Intervention::Kind::CA: return "CA";
    case Intervention::Kind::SC: return "SC";
    case Intervention::Kind::AW: return "AW";
    case Intervention::Kind::MeanShift: return "MeanShift";
    case Intervention::Kind::None: break;
  }
  return "None";
}

inline Intervention::Kind intervention_from_string(const std::string& s) {
  if (s == "CA") return Intervention::Kind::CA;
  if (s == "SC") return Intervention::Kind::SC;
  if (s == "AW") return Intervention::Kind::AW;
  if (s == "MeanShift") return Intervention::Kind::MeanShift;
  if (s == "None") return Intervention::Kind::None;
  throw Error("unknown intervention kind '" + s + "'");
}

/// M source domains plus one target.
struct EnvironmentSet {
  std::vector<DomainParams> sources;
  DomainParams target;
  Intervention intervention;

  Index dim() const { return target.dim(); }
  int num_sources() const { return static_cast<int>(sources.size()); }
  /// Tag 0 is the target, 1..M the sources.
  const DomainParams& domain(int tag) const { return tag == 0 ? target : sources.at(tag - 1); }
};

/// Checks per-domain validity and the declared intervention's structure.
inline void validate(const EnvironmentSet& env) {
  require(!env.sources.empty(), "environment needs at least one source");
  const Index d = env.dim();
  validate(env.target);
  for (const auto& s : env.sources) {
    validate(s);
    require(s.dim() == d, "all domains must share dimension d");
  }
  const auto& s1 = env.sources.front();
  const auto& t = env.target;
  switch (env.intervention.kind) {
    case Intervention::Kind::CA:
      require(s1.connectivity == t.connectivity && s1.weights == t.weights,
              "CA: first source and target must share B and b");
      require(t.confounder.has_value(), "CA: target must carry a confounder");
      require(t.confounder->w.cols() == env.intervention.rank, "CA: confounder rank must equal r_ca");
      for (const auto& s : env.sources) require(!s.confounder, "CA: sources must be unconfounded");
      break;
    case Intervention::Kind::SC: {
      require(s1.weights == t.weights, "SC: first source and target must share b");
      std::vector<bool> in_s(static_cast<std::size_t>(d), false);
      for (int j : env.intervention.support) {
        require(j >= 0 && j < d, "SC: support index out of range");
        in_s[static_cast<std::size_t>(j)] = true;
      }
      for (Index j = 0; j < d; ++j) {
        const bool same = s1.connectivity.col(j) == t.connectivity.col(j);
        require(same != in_s[static_cast<std::size_t>(j)],
                "SC: B matrices must differ exactly on the support columns");
      }
      break;
    }
    case Intervention::Kind::AW: {
      for (const auto& s : env.sources)
        require(s.connectivity == t.connectivity, "AW: all domains must share B");
      const int m = env.num_sources();
      require(m >= 2, "AW: needs at least two sources");
      Matrix diffs(d, m - 1);
      for (int k = 1; k < m; ++k) diffs.col(k - 1) = env.sources[static_cast<std::size_t>(k)].weights - s1.weights;
      const Vector target_diff = t.weights - s1.weights;
      const Vector coef = diffs.completeOrthogonalDecomposition().solve(target_diff);
      require((diffs * coef - target_diff).norm() < 1e-8, "AW: b^(0) - b^(1) must lie in the span of source differences");
      break;
    }
    case Intervention::Kind::MeanShift:
    case Intervention::Kind::None:
      break;
  }
}

/// Exact moments of one domain.
struct PopulationMoments {
  Matrix sigma_x;  // E[XXᵀ]
  Vector exy;      // E[XY]
  double var_y = 1.0;
  Vector mean_x;

  Moments as_moments() const { return {sigma_x, exy}; }
};

inline PopulationMoments population_moments(const DomainParams& p) {
  const Index d = p.dim();
  const Matrix h = mixing_matrix(p);
  const Vector& b = p.weights;

  PopulationMoments m;
  m.var_y = p.noise_var_y;
  Matrix inner = p.noise_var_y * b * b.transpose() + p.noise_cov_x;
  Vector cross = p.noise_var_y * b;
  if (p.confounder) {
    const auto& c = *p.confounder;
    const Matrix perturb = b * c.w_y.transpose() + c.w;  // b w_Yᵀ + W
    inner += perturb * perturb.transpose();
    m.var_y += c.w_y.squaredNorm();
    cross += c.w_y.squaredNorm() * b + c.w * c.w_y;
  }
  Vector mu = Vector::Zero(d);
  if (p.mean_shift) {
    mu = *p.mean_shift;
    inner += mu * mu.transpose();
  }
  m.sigma_x = h * inner * h.transpose();
  m.sigma_x = 0.5 * (m.sigma_x + m.sigma_x.transpose()).eval();
  m.exy = h * cross;
  m.mean_x = h * mu;
  return m;
}

namespace detail {

inline Matrix random_strict_lower(Index d, double variance, Rng& rng) {
  Matrix b = Matrix::Zero(d, d);
  for (Index i = 1; i < d; ++i)
    for (Index j = 0; j < i; ++j) b(i, j) = rng.normal(variance);
  return b;
}

inline Vector random_vector(Index n, double variance, Rng& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal(variance);
  return v;
}

inline DomainParams plain_domain(Matrix conn, Vector weights) {
  const Index d = weights.size();
  DomainParams p;
  p.connectivity = std::move(conn);
  p.weights = std::move(weights);
  p.noise_cov_x = Matrix::Identity(d, d);
  p.noise_var_y = 1.0;
  return p;
}

}  // namespace detail

/// Confounded additive shift: target shares B^(1), b^(1) and adds a rank-r
/// hidden confounder.
inline EnvironmentSet make_ca_environments(int d, int r_ca, int m_sources, std::uint64_t seed) {
  require(d >= 2, "CA: d must be at least 2");
  require(r_ca >= 1 && r_ca < d, "CA: need 1 <= r_ca < d");
  require(m_sources >= 1, "CA: need at least one source");
  Rng rng(seed);
  const double dd = d;
  EnvironmentSet env;
  for (int m = 0; m < m_sources; ++m) {
    Matrix b = detail::random_strict_lower(d, 9.0 / dd, rng);
    Vector w = detail::random_vector(d, 0.25 / dd, rng);
    env.sources.push_back(detail::plain_domain(std::move(b), std::move(w)));
  }
  env.target = detail::plain_domain(env.sources.front().connectivity, env.sources.front().weights);
  Confounder c;
  c.w.resize(d, r_ca);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < r_ca; ++j) c.w(i, j) = rng.normal(25.0 / r_ca);
  c.w_y = detail::random_vector(r_ca, 25.0 / r_ca, rng);
  env.target.confounder = std::move(c);
  env.intervention = {Intervention::Kind::CA, r_ca, {}};
  validate(env);
  return env;
}

/// Sparse connectivity shift: the target modifies the first r_sc columns of B^(1).
inline EnvironmentSet make_sc_environments(int d, int r_sc, int m_sources, std::uint64_t seed) {
  require(d >= 2, "SC: d must be at least 2");
  require(r_sc >= 1 && r_sc < d, "SC: need 1 <= r_sc < d");
  require(m_sources >= 1, "SC: need at least one source");
  Rng rng(seed);
  const double dd = d;
  EnvironmentSet env;
  for (int m = 0; m < m_sources; ++m) {
    Matrix b = detail::random_strict_lower(d, 0.25 / dd, rng);
    Vector w = detail::random_vector(d, 4.0 / dd, rng);
    env.sources.push_back(detail::plain_domain(std::move(b), std::move(w)));
  }
  const auto& s1 = env.sources.front();
  Matrix target_b = s1.connectivity;
  for (Index j = 0; j < r_sc; ++j)
    for (Index i = j + 1; i < d; ++i) target_b(i, j) += s1.weights(i) + rng.normal(1.0 / dd);
  env.target = detail::plain_domain(std::move(target_b), s1.weights);
  env.intervention.kind = Intervention::Kind::SC;
  env.intervention.rank = r_sc;
  for (int j = 0; j < r_sc; ++j) env.intervention.support.push_back(j);
  validate(env);
  return env;
}

/// Number of non-invariant coordinates in the AW generator: 70 at d = 100,
/// ceil(0.7 d) in general.
inline int aw_noninvariant_count(int d) { return static_cast<int>(std::ceil(0.7 * d - 1e-9)); }

/// Anticausal weight shift: shared B, b^(m) = [U ζ^(m); b_inv].
inline EnvironmentSet make_aw_environments(int d, int r_aw, int m_sources, std::uint64_t seed) {
  require(r_aw >= 1 && r_aw < d, "AW: need 1 <= r_aw < d");
  require(m_sources >= r_aw + 1, "AW: need m_sources >= r_aw + 1");
  require(m_sources <= d, "AW: need m_sources <= d");
  const int k = aw_noninvariant_count(d);
  require(r_aw <= k, "AW: r_aw exceeds the number of non-invariant coordinates");
  Rng rng(seed);
  const double dd = d;
  const Matrix shared_b = detail::random_strict_lower(d, 9.0 / dd, rng);
  Matrix u(k, r_aw);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < r_aw; ++j) u(i, j) = rng.normal(1.0 / dd);
  const Vector b_inv = detail::random_vector(d - k, 1.0 / dd, rng);

  auto weights = [&](double zeta_var) {
    Vector zeta(r_aw);
    for (Index j = 0; j < r_aw; ++j) zeta(j) = std::abs(rng.normal(zeta_var));
    Vector w(d);
    w.head(k) = u * zeta;
    w.tail(d - k) = b_inv;
    return w;
  };

  EnvironmentSet env;
  for (int m = 0; m < m_sources; ++m) env.sources.push_back(detail::plain_domain(shared_b, weights(16.0 / r_aw)));
  env.target = detail::plain_domain(shared_b, weights(0.25 / r_aw));
  env.intervention = {Intervention::Kind::AW, r_aw, {}};
  validate(env);
  return env;
}

/// Connectivity-shift worked example on three covariates: only the edges out of
/// X_1 change between the first source and the target.
inline EnvironmentSet example3_environment() {
  Matrix src = Matrix::Zero(3, 3);
  src(1, 0) = 2.0;
  src(2, 0) = 2.0;
  src(2, 1) = 2.0;
  Matrix tar = src;
  tar(1, 0) = -2.0;
  tar(2, 0) = -2.0;
  EnvironmentSet env;
  env.sources.push_back(detail::plain_domain(src, Vector::Ones(3)));
  env.target = detail::plain_domain(tar, Vector::Ones(3));
  env.intervention = {Intervention::Kind::SC, 1, {0}};
  validate(env);
  return env;
}

/// Additive mean-shift worked example on three covariates (B = 0, b = 1).
inline EnvironmentSet example4_environment() {
  EnvironmentSet env;
  auto src = detail::plain_domain(Matrix::Zero(3, 3), Vector::Ones(3));
  src.mean_shift = Vector{{93.0 / 8.0, 1.0, -77.0 / 8.0}};
  auto tar = detail::plain_domain(Matrix::Zero(3, 3), Vector::Ones(3));
  tar.mean_shift = Vector{{13.0 / 4.0, 0.0, -13.0 / 4.0}};
  env.sources.push_back(std::move(src));
  env.target = std::move(tar);
  env.intervention.kind = Intervention::Kind::MeanShift;
  validate(env);
  return env;
}

namespace detail {

// Labeled and unlabeled draws from the same (params, seed) use distinct streams.
inline constexpr std::uint64_t kLabeledStream = 0x4c4142454cULL;    // "LABEL"
inline constexpr std::uint64_t kUnlabeledStream = 0x554e4c4142ULL;  // "UNLAB"

inline Dataset sample(const DomainParams& p, Index n, std::uint64_t seed, bool labeled) {
  require(n >= 1, "sample size must be at least 1");
  const Index d = p.dim();
  Rng rng(derive_seed(seed, {labeled ? kLabeledStream : kUnlabeledStream}));

  Vector y(n);
  for (Index i = 0; i < n; ++i) y(i) = rng.normal(p.noise_var_y);

  // U = b Y + ε_X (+ W Z) (+ μ), one row per sample.
  Matrix u(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) u(i, j) = rng.normal();
  if (!p.noise_cov_x.isIdentity(0.0)) {
    const Matrix l = p.noise_cov_x.llt().matrixL();
    u = (u * l.transpose()).eval();
  }
  if (p.confounder) {
    const auto& c = *p.confounder;
    const Index r = c.w.cols();
    Matrix z(n, r);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < r; ++j) z(i, j) = rng.normal();
    y += z * c.w_y;
    u += z * c.w.transpose();
  }
  u += y * p.weights.transpose();
  if (p.mean_shift) u.rowwise() += p.mean_shift->transpose();

  // X = U Hᵀ  <=>  (I - B) Xᵀ = Uᵀ
  const Matrix ib = Matrix::Identity(d, d) - p.connectivity;
  Dataset out;
  if (ib.isLowerTriangular(0.0))
    out.x = ib.triangularView<Eigen::Lower>().solve(u.transpose()).transpose();
  else
    out.x = ib.partialPivLu().solve(u.transpose()).transpose();
  if (labeled) out.y = std::move(y);
  out.seed = seed;
  return out;
}

}  // namespace detail

inline Dataset sample_labeled(const DomainParams& p, Index n, std::uint64_t seed, int domain_tag = 0) {
  Dataset out = detail::sample(p, n, seed, true);
  out.domain_tag = domain_tag;
  return out;
}

inline Dataset sample_unlabeled(const DomainParams& p, Index n, std::uint64_t seed, int domain_tag = 0) {
  Dataset out = detail::sample(p, n, seed, false);
  out.domain_tag = domain_tag;
  return out;
}

/// CSV: header x_1,...,x_d[,y]; 17 significant digits.
inline void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const Index d = data.dim();
  for (Index j = 0; j < d; ++j) out << (j ? "," : "") << "x_" << (j + 1);
  if (data.y) out << ",y";
  out << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < d; ++j) out << (j ? "," : "") << io::fmt(data.x(i, j));
    if (data.y) out << ',' << io::fmt((*data.y)(i));
    out << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("dataset CSV is empty");
  const auto header = io::split(io::trim(line), ',');
  const bool labeled = !header.empty() && header.back() == "y";
  const Index d = static_cast<Index>(header.size()) - (labeled ? 1 : 0);
  require(d >= 1, "dataset CSV has no covariate columns");
  for (Index j = 0; j < d; ++j)
    require(header[static_cast<std::size_t>(j)] == "x_" + std::to_string(j + 1), "dataset CSV header is malformed");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    line = io::trim(line);
    if (line.empty()) continue;
    const auto cells = io::split(line, ',');
    require(cells.size() == header.size(), "dataset CSV row has the wrong number of cells");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(io::parse_double(c));
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "dataset CSV has no rows");
  Dataset out;
  const Index n = static_cast<Index>(rows.size());
  out.x.resize(n, d);
  if (labeled) out.y = Vector(n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (Index j = 0; j < d; ++j) out.x(i, j) = r[static_cast<std::size_t>(j)];
    if (labeled) (*out.y)(i) = r.back();
  }
  return out;
}

namespace detail {

inline void write_domain(std::ostream& out, const std::string& prefix, const DomainParams& p) {
  out << prefix << ".connectivity = " << io::format_matrix(p.connectivity) << '\n';
  out << prefix << ".weights = " << io::format_vector(p.weights) << '\n';
  out << prefix << ".noise_cov_x = " << io::format_matrix(p.noise_cov_x) << '\n';
  out << prefix << ".noise_var_y = " << io::fmt(p.noise_var_y) << '\n';
  if (p.confounder) {
    out << prefix << ".confounder.w = " << io::format_matrix(p.confounder->w) << '\n';
    out << prefix << ".confounder.w_y = " << io::format_vector(p.confounder->w_y) << '\n';
  }
  if (p.mean_shift) out << prefix << ".mean_shift = " << io::format_vector(*p.mean_shift) << '\n';
}

}  // namespace detail

/// Structured text form of an environment (flat `key = value`).
inline void write_environment(std::ostream& out, const EnvironmentSet& env) {
  out << "# anticausal linear SCM environment\n";
  out << "dim = " << env.dim() << '\n';
  out << "intervention = " << to_string(env.intervention.kind) << '\n';
  out << "intervention.rank = " << env.intervention.rank << '\n';
  out << "intervention.support =";
  for (int j : env.intervention.support) out << ' ' << j;
  out << '\n';
  out << "sources = " << env.num_sources() << '\n';
  detail::write_domain(out, "target", env.target);
  for (int m = 0; m < env.num_sources(); ++m)
    detail::write_domain(out, "source." + std::to_string(m + 1), env.sources[static_cast<std::size_t>(m)]);
}

inline EnvironmentSet read_environment(std::istream& in) {
  std::map<std::string, std::string> kv;
  for (auto& [k, v] : io::parse_key_values(in)) kv[k] = v;
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error("environment file is missing key '" + key + "'");
    return it->second;
  };
  auto read_domain = [&](const std::string& prefix) {
    DomainParams p;
    p.connectivity = io::parse_matrix(get(prefix + ".connectivity"));
    p.weights = io::parse_vector(get(prefix + ".weights"));
    p.noise_cov_x = io::parse_matrix(get(prefix + ".noise_cov_x"));
    p.noise_var_y = io::parse_double(get(prefix + ".noise_var_y"));
    if (kv.count(prefix + ".confounder.w"))
      p.confounder = Confounder{io::parse_matrix(get(prefix + ".confounder.w")),
                                io::parse_vector(get(prefix + ".confounder.w_y"))};
    if (kv.count(prefix + ".mean_shift")) p.mean_shift = io::parse_vector(get(prefix + ".mean_shift"));
    return p;
  };
  EnvironmentSet env;
  env.intervention.kind = intervention_from_string(get("intervention"));
  env.intervention.rank = std::stoi(get("intervention.rank"));
  {
    std::istringstream s(kv.count("intervention.support") ? kv["intervention.support"] : std::string{});
    int j;
    while (s >> j) env.intervention.support.push_back(j);
  }
  const int m = std::stoi(get("sources"));
  env.target = read_domain("target");
  for (int k = 1; k <= m; ++k) env.sources.push_back(read_domain("source." + std::to_string(k)));
  require(env.dim() == std::stol(get("dim")), "environment dim does not match its matrices");
  validate(env);
  return env;
}

}  // namespace ssda
