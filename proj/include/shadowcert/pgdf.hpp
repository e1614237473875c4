#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shadowcert/geometry.hpp"
#include "shadowcert/random.hpp"
#include "shadowcert/stats.hpp"

// The PGDF obstacle model: polytopes whose face normals (in homogeneous
// coordinates) are Gaussian. Certification never assumes faces are drawn
// independently; sampling needs a concrete joint law, so independent faces
// is the default and an optional full joint covariance over the
// concatenated face parameters can be supplied for the oracle.

namespace shadowcert {

/// Posterior over one face's homogeneous normal: n ~ N(mu, sigma).
struct GaussianFace {
  HomoVec mu;
  SymMatrix sigma;

  GaussianFace() = default;
  GaussianFace(HomoVec mu_, SymMatrix sigma_) : mu(std::move(mu_)), sigma(std::move(sigma_)) {
    if (mu.size() != sigma.size())
      throw std::invalid_argument("GaussianFace: mu/sigma dimension mismatch");
    if (!is_psd(sigma)) throw std::invalid_argument("GaussianFace: sigma not PSD");
  }
  int size() const { return mu.size(); }
};

/// Full covariance over the concatenation of all face parameters
/// (m*(d+1) entries, row-major), for coupled sampling.
struct JointCovariance {
  std::vector<double> entries;
  int dim = 0;
};

/// Uncertain polytope: ordered Gaussian faces plus a label.
struct PgdfObstacle {
  std::string id;
  std::vector<GaussianFace> faces;
  std::optional<JointCovariance> joint;

  PgdfObstacle() = default;
  PgdfObstacle(std::string id_, std::vector<GaussianFace> faces_)
      : id(std::move(id_)), faces(std::move(faces_)) {
    validate();
  }
  void validate() const {
    if (faces.empty()) throw std::invalid_argument("PgdfObstacle: needs at least one face");
    for (const auto& f : faces)
      if (f.size() != faces[0].size())
        throw std::invalid_argument("PgdfObstacle: face dimension mismatch");
    if (joint && joint->dim != static_cast<int>(faces.size()) * faces[0].size())
      throw std::invalid_argument("PgdfObstacle: joint covariance dimension mismatch");
  }
  int homo_dim() const { return faces[0].size(); }
  int face_count() const { return static_cast<int>(faces.size()); }
};

/// One concrete draw of every face normal.
struct SampledObstacle {
  std::vector<HomoVec> normals;
};

namespace detail {

/// Dense Cholesky for the joint-covariance sampler (dimension m*(d+1)).
inline std::vector<double> cholesky_dynamic(const std::vector<double>& m, int n) {
  std::vector<double> l(static_cast<size_t>(n) * n, 0.0);
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(m[static_cast<size_t>(i) * n + i]));
  const double tol = 1e-12 * std::max(1.0, scale);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = m[static_cast<size_t>(i) * n + j];
      for (int k = 0; k < j; ++k)
        s -= l[static_cast<size_t>(i) * n + k] * l[static_cast<size_t>(j) * n + k];
      if (i == j) {
        if (s < -tol) throw std::invalid_argument("joint covariance is indefinite");
        l[static_cast<size_t>(i) * n + j] = std::sqrt(std::max(0.0, s));
      } else {
        double d = l[static_cast<size_t>(j) * n + j];
        l[static_cast<size_t>(i) * n + j] = (d > tol) ? s / d : 0.0;
      }
    }
  }
  return l;
}

}  // namespace detail

/// Caches the per-face (or joint) covariance factors so Monte-Carlo loops
/// pay the factorization once.
class ObstacleSampler {
 public:
  explicit ObstacleSampler(const PgdfObstacle& o) : obstacle_(&o) {
    if (o.joint) {
      joint_lower_ = detail::cholesky_dynamic(o.joint->entries, o.joint->dim);
    } else {
      face_lowers_.reserve(o.faces.size());
      for (const auto& f : o.faces) face_lowers_.push_back(cholesky(f.sigma).lower);
    }
  }

  SampledObstacle sample(RngStream& rng) const {
    const auto& o = *obstacle_;
    SampledObstacle s;
    s.normals.reserve(o.faces.size());
    const int hd = o.homo_dim();
    if (o.joint) {
      const int n = o.joint->dim;
      std::vector<double> z(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) z[static_cast<size_t>(i)] = rng.normal();
      for (int f = 0; f < o.face_count(); ++f) {
        Vec v(hd);
        for (int i = 0; i < hd; ++i) {
          int row = f * hd + i;
          double acc = o.faces[static_cast<size_t>(f)].mu[i];
          for (int k = 0; k <= row; ++k)
            acc += joint_lower_[static_cast<size_t>(row) * n + k] * z[static_cast<size_t>(k)];
          v[i] = acc;
        }
        s.normals.push_back(HomoVec(v));
      }
      return s;
    }
    for (size_t f = 0; f < o.faces.size(); ++f) {
      const Vec& mu = o.faces[f].mu.coords;
      const Mat& l = face_lowers_[f];
      Vec z(hd);
      for (int i = 0; i < hd; ++i) z[i] = rng.normal();
      Vec v(hd);
      for (int i = 0; i < hd; ++i) {
        double acc = mu[i];
        for (int j = 0; j < hd; ++j) acc += l.at(i, j) * z[j];
        v[i] = acc;
      }
      s.normals.push_back(HomoVec(v));
    }
    return s;
  }

 private:
  const PgdfObstacle* obstacle_;
  std::vector<Mat> face_lowers_;
  std::vector<double> joint_lower_;
};

/// Draws one realization of the obstacle.
inline SampledObstacle sample_obstacle(const PgdfObstacle& o, RngStream& rng) {
  return ObstacleSampler(o).sample(rng);
}

/// Wrapper for the spec'd single-face draw.
inline HomoVec sample_gaussian(const HomoVec& mu, const SymMatrix& sigma, RngStream& rng) {
  return HomoVec(sample_gaussian_vec(mu.coords, sigma, rng));
}

/// Tests whether the halfspace with parameter n lies inside the cone of
/// the face's confidence ellipsoid at radius-squared q: whether some
/// lambda > 0 puts lambda*n inside {(a - mu)^T Sigma^-1 (a - mu) <= q}.
/// Singular covariances fall back to the pseudo-inverse; the component of
/// lambda*n - mu along null directions must then vanish (relative
/// residual <= 1e-9).
class FaceConeTester {
 public:
  explicit FaceConeTester(const GaussianFace& face) : eig_(eigen_sym(face.sigma)) {
    n_ = face.size();
    double lmax = 0.0;
    for (int i = 0; i < n_; ++i) lmax = std::max(lmax, std::abs(eig_.values[i]));
    tol_ = 1e-12 * std::max(1.0, lmax);
    b_ = eig_.vectors.apply_transposed(face.mu.coords);
    mu_norm_ = face.mu.coords.norm();
  }

  bool contains(const HomoVec& n, double q) const {
    Vec a = eig_.vectors.apply_transposed(n.coords);

    // Null-space consistency: lambda * a_i must match b_i exactly.
    double num_null = 0.0, den_null = 0.0, max_b_null = 0.0;
    bool has_null = false;
    for (int i = 0; i < n_; ++i) {
      if (eig_.values[i] > tol_) continue;
      has_null = true;
      num_null += a[i] * b_[i];
      den_null += a[i] * a[i];
      max_b_null = std::max(max_b_null, std::abs(b_[i]));
    }

    double lambda;
    bool lambda_fixed = false;
    const double null_tol = 1e-9 * std::max(1.0, mu_norm_ + n.coords.norm());
    if (has_null && den_null > null_tol * null_tol) {
      lambda = num_null / den_null;
      lambda_fixed = true;
      if (lambda <= 0.0) return false;
      for (int i = 0; i < n_; ++i) {
        if (eig_.values[i] > tol_) continue;
        if (std::abs(lambda * a[i] - b_[i]) > null_tol * std::max(1.0, std::abs(lambda)))
          return false;
      }
    } else if (has_null && max_b_null > null_tol) {
      // n has no null component but mu does: unreachable.
      return false;
    } else {
      lambda = 0.0;  // free; chosen below
    }

    double num = 0.0, den = 0.0;
    for (int i = 0; i < n_; ++i) {
      if (eig_.values[i] <= tol_) continue;
      double w = 1.0 / eig_.values[i];
      num += w * a[i] * b_[i];
      den += w * a[i] * a[i];
    }
    if (!lambda_fixed) {
      // Minimizer of the quadratic in lambda, clamped to (0, inf); the
      // infimum at the clamp is the value at lambda = 0.
      lambda = (den > 0.0) ? std::max(0.0, num / den) : 0.0;
    }
    double value = 0.0;
    for (int i = 0; i < n_; ++i) {
      if (eig_.values[i] <= tol_) continue;
      double r = lambda * a[i] - b_[i];
      value += r * r / eig_.values[i];
    }
    return value <= q;
  }

 private:
  EigenSym eig_;
  Vec b_;
  double tol_ = 0.0;
  double mu_norm_ = 0.0;
  int n_ = 0;
};

inline bool halfspace_in_cone(const HomoVec& n, const GaussianFace& face, double q) {
  if (q < 0.0) throw std::invalid_argument("halfspace_in_cone: q must be >= 0");
  return FaceConeTester(face).contains(n, q);
}

/// Points segmented to one face, with the sensor noise level and the
/// Gaussian prior the regression starts from.
struct FacePointCloud {
  std::vector<Point> points;
  double noise_sd = 0.0;
  GaussianFace prior;
};

/// Bayesian linear regression of a face plane from its point cloud.
/// Homogeneous plane parameters are scale invariant, so the coordinate of
/// the prior mean with the largest magnitude is gauge-fixed to its prior
/// value and the remaining d coordinates are regressed against targets
/// n^T lift(x) = 0. The prior on the free coordinates is the conditional
/// prior given the gauge coordinate; rank-deficient priors regress only
/// in the directions the prior leaves open.
inline GaussianFace fit_face(const FacePointCloud& cloud) {
  if (!(cloud.noise_sd > 0.0)) throw std::invalid_argument("fit_face: noise_sd must be > 0");
  const GaussianFace& prior = cloud.prior;
  if (cloud.points.empty()) return prior;

  const int hd = prior.size();
  const int d = hd - 1;
  for (const Point& p : cloud.points)
    if (p.dim() != d) throw std::invalid_argument("fit_face: point dimension mismatch");

  // Gauge coordinate: largest-magnitude prior mean entry.
  int g = 0;
  for (int i = 1; i < hd; ++i)
    if (std::abs(prior.mu[i]) > std::abs(prior.mu[g])) g = i;
  std::vector<int> free;
  for (int i = 0; i < hd; ++i)
    if (i != g) free.push_back(i);

  // Conditional prior on the free coordinates given the gauge value.
  Vec m0(d);
  for (int i = 0; i < d; ++i) m0[i] = prior.mu[free[static_cast<size_t>(i)]];
  SymMatrix s0(d);
  double sgg = prior.sigma.at(g, g);
  double sigma_scale = std::max(1.0, std::abs(prior.sigma.trace()));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double v = prior.sigma.at(free[static_cast<size_t>(i)], free[static_cast<size_t>(j)]);
      if (sgg > 1e-14 * sigma_scale)
        v -= prior.sigma.at(free[static_cast<size_t>(i)], g) *
             prior.sigma.at(free[static_cast<size_t>(j)], g) / sgg;
      s0.at(i, j) = v;
    }

  // Work in the prior's range coordinates so singular priors stay fixed
  // along their null directions.
  EigenSym eig = eigen_sym(s0);
  double lmax = 0.0;
  for (int i = 0; i < d; ++i) lmax = std::max(lmax, std::abs(eig.values[i]));
  double tol = 1e-12 * std::max(1.0, lmax);
  std::vector<int> range;
  for (int i = 0; i < d; ++i)
    if (eig.values[i] > tol) range.push_back(i);
  const int r = static_cast<int>(range.size());
  if (r == 0) return prior;  // prior admits no update in any direction

  // Accumulate normal equations in z-space: theta = m0 + V_r z.
  const double inv_var = 1.0 / (cloud.noise_sd * cloud.noise_sd);
  SymMatrix data_prec(r);
  Vec data_rhs(r);
  for (const Point& p : cloud.points) {
    HomoVec xh = lift(p);
    Vec phi(d);
    for (int i = 0; i < d; ++i) phi[i] = xh[free[static_cast<size_t>(i)]];
    double y = -prior.mu[g] * xh[g];
    double resid = y - phi.dot(m0);
    Vec psi(r);
    for (int i = 0; i < r; ++i) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += eig.vectors.at(j, range[static_cast<size_t>(i)]) * phi[j];
      psi[i] = s;
    }
    for (int i = 0; i < r; ++i) {
      data_rhs[i] += inv_var * psi[i] * resid;
      for (int j = 0; j < r; ++j) data_prec.at(i, j) += inv_var * psi[i] * psi[j];
    }
  }
  SymMatrix post_prec = data_prec;
  for (int i = 0; i < r; ++i)
    post_prec.at(i, i) += 1.0 / eig.values[range[static_cast<size_t>(i)]];

  SymMatrix post_cov_z = pseudo_inverse(post_prec);
  Vec mz = post_cov_z.apply(data_rhs);

  // Map back: free coordinates, then embed with the gauge coordinate held.
  Vec mu_free = m0;
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int k = 0; k < r; ++k) s += eig.vectors.at(i, range[static_cast<size_t>(k)]) * mz[k];
    mu_free[i] += s;
  }
  SymMatrix cov_free(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b)
          s += eig.vectors.at(i, range[static_cast<size_t>(a)]) * post_cov_z.at(a, b) *
               eig.vectors.at(j, range[static_cast<size_t>(b)]);
      cov_free.at(i, j) = s;
    }

  Vec mu_out(hd);
  SymMatrix cov_out(hd);
  mu_out[g] = prior.mu[g];
  for (int i = 0; i < d; ++i) {
    mu_out[free[static_cast<size_t>(i)]] = mu_free[i];
    for (int j = 0; j < d; ++j)
      cov_out.at(free[static_cast<size_t>(i)], free[static_cast<size_t>(j)]) = cov_free.at(i, j);
  }
  return GaussianFace(HomoVec(mu_out), cov_out);
}

}  // namespace shadowcert
