#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

// Small fixed-capacity dense linear algebra for workspace dimensions
// d in {2, 3} (homogeneous dimension d+1 <= 4). Everything is by value;
// no heap allocation on these paths.

namespace shadowcert {

inline constexpr int kMaxDim = 4;

class Vec {
 public:
  Vec() : n_(0) { v_.fill(0.0); }
  explicit Vec(int n) : n_(check_dim(n)) { v_.fill(0.0); }
  Vec(std::initializer_list<double> xs) : n_(check_dim(static_cast<int>(xs.size()))) {
    v_.fill(0.0);
    std::copy(xs.begin(), xs.end(), v_.begin());
  }

  int size() const { return n_; }
  double operator[](int i) const { return v_[static_cast<size_t>(i)]; }
  double& operator[](int i) { return v_[static_cast<size_t>(i)]; }

  double dot(const Vec& o) const {
    require_same(o);
    double s = 0.0;
    for (int i = 0; i < n_; ++i) s += v_[i] * o.v_[i];
    return s;
  }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }

  Vec operator+(const Vec& o) const {
    require_same(o);
    Vec r(n_);
    for (int i = 0; i < n_; ++i) r[i] = v_[i] + o.v_[i];
    return r;
  }
  Vec operator-(const Vec& o) const {
    require_same(o);
    Vec r(n_);
    for (int i = 0; i < n_; ++i) r[i] = v_[i] - o.v_[i];
    return r;
  }
  Vec operator*(double s) const {
    Vec r(n_);
    for (int i = 0; i < n_; ++i) r[i] = v_[i] * s;
    return r;
  }

  bool finite() const {
    for (int i = 0; i < n_; ++i)
      if (!std::isfinite(v_[i])) return false;
    return true;
  }

  bool operator==(const Vec& o) const {
    if (n_ != o.n_) return false;
    for (int i = 0; i < n_; ++i)
      if (v_[i] != o.v_[i]) return false;
    return true;
  }

 private:
  static int check_dim(int n) {
    if (n < 0 || n > kMaxDim) throw std::invalid_argument("Vec: dimension out of range");
    return n;
  }
  void require_same(const Vec& o) const {
    if (n_ != o.n_) throw std::invalid_argument("Vec: dimension mismatch");
  }
  std::array<double, kMaxDim> v_;
  int n_;
};

inline Vec operator*(double s, const Vec& v) { return v * s; }

/// Dense square matrix, row-major.
class Mat {
 public:
  Mat() : n_(0) { m_.fill(0.0); }
  explicit Mat(int n) : n_(check_dim(n)) { m_.fill(0.0); }

  static Mat identity(int n) {
    Mat m(n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  int size() const { return n_; }
  double at(int i, int j) const { return m_[static_cast<size_t>(i * n_ + j)]; }
  double& at(int i, int j) { return m_[static_cast<size_t>(i * n_ + j)]; }

  Vec apply(const Vec& v) const {
    if (v.size() != n_) throw std::invalid_argument("Mat: dimension mismatch");
    Vec r(n_);
    for (int i = 0; i < n_; ++i) {
      double s = 0.0;
      for (int j = 0; j < n_; ++j) s += at(i, j) * v[j];
      r[i] = s;
    }
    return r;
  }

  /// v^T applied from the left: returns M^T v.
  Vec apply_transposed(const Vec& v) const {
    if (v.size() != n_) throw std::invalid_argument("Mat: dimension mismatch");
    Vec r(n_);
    for (int j = 0; j < n_; ++j) {
      double s = 0.0;
      for (int i = 0; i < n_; ++i) s += at(i, j) * v[i];
      r[j] = s;
    }
    return r;
  }

 private:
  static int check_dim(int n) {
    if (n < 0 || n > kMaxDim) throw std::invalid_argument("Mat: dimension out of range");
    return n;
  }
  std::array<double, kMaxDim * kMaxDim> m_;
  int n_;
};

/// Symmetric matrix; symmetrized at construction (tolerance 1e-12 on the
/// asymmetry relative to the largest entry).
class SymMatrix {
 public:
  SymMatrix() : n_(0) { m_.fill(0.0); }
  explicit SymMatrix(int n) : n_(check_dim(n)) { m_.fill(0.0); }

  /// Builds from row-major entries, enforcing symmetry.
  static SymMatrix from_rows(int n, const double* entries) {
    SymMatrix m(n);
    double scale = 0.0;
    for (int i = 0; i < n * n; ++i) scale = std::max(scale, std::abs(entries[i]));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double a = entries[i * n + j], b = entries[j * n + i];
        if (std::abs(a - b) > 1e-12 * std::max(1.0, scale))
          throw std::invalid_argument("SymMatrix: not symmetric");
        m.at(i, j) = 0.5 * (a + b);
      }
    return m;
  }

  static SymMatrix identity(int n) {
    SymMatrix m(n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
  static SymMatrix diagonal(const Vec& d) {
    SymMatrix m(d.size());
    for (int i = 0; i < d.size(); ++i) m.at(i, i) = d[i];
    return m;
  }
  /// Rank-one vv^T.
  static SymMatrix outer(const Vec& v) {
    SymMatrix m(v.size());
    for (int i = 0; i < v.size(); ++i)
      for (int j = 0; j < v.size(); ++j) m.at(i, j) = v[i] * v[j];
    return m;
  }

  int size() const { return n_; }
  double at(int i, int j) const { return m_[static_cast<size_t>(i * n_ + j)]; }
  double& at(int i, int j) { return m_[static_cast<size_t>(i * n_ + j)]; }

  double trace() const {
    double t = 0.0;
    for (int i = 0; i < n_; ++i) t += at(i, i);
    return t;
  }

  Vec apply(const Vec& v) const {
    if (v.size() != n_) throw std::invalid_argument("SymMatrix: dimension mismatch");
    Vec r(n_);
    for (int i = 0; i < n_; ++i) {
      double s = 0.0;
      for (int j = 0; j < n_; ++j) s += at(i, j) * v[j];
      r[i] = s;
    }
    return r;
  }

  SymMatrix operator+(const SymMatrix& o) const {
    if (n_ != o.n_) throw std::invalid_argument("SymMatrix: dimension mismatch");
    SymMatrix r(n_);
    for (int i = 0; i < n_ * n_; ++i) r.m_[i] = m_[i] + o.m_[i];
    return r;
  }
  SymMatrix operator*(double s) const {
    SymMatrix r(n_);
    for (int i = 0; i < n_ * n_; ++i) r.m_[i] = m_[i] * s;
    return r;
  }

  bool is_zero() const {
    for (int i = 0; i < n_ * n_; ++i)
      if (m_[i] != 0.0) return false;
    return true;
  }

 private:
  static int check_dim(int n) {
    if (n < 0 || n > kMaxDim) throw std::invalid_argument("SymMatrix: dimension out of range");
    return n;
  }
  std::array<double, kMaxDim * kMaxDim> m_;
  int n_;
};

/// Evaluates v^T M v.
inline double quad_form(const SymMatrix& m, const Vec& v) {
  if (m.size() != v.size()) throw std::invalid_argument("quad_form: dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < m.size(); ++i) {
    double row = 0.0;
    for (int j = 0; j < m.size(); ++j) row += m.at(i, j) * v[j];
    s += v[i] * row;
  }
  return s;
}

struct CholeskyResult {
  Mat lower;        // L with L L^T = M (columns beyond rank are zero)
  int rank = 0;
  bool degenerate = false;  // PSD but singular
};

namespace detail {

/// Pivoted factorization used when the plain algorithm stalls on a
/// (numerically) zero pivot: produces L in the original row order with
/// L L^T = M and rank detection. Throws on indefinite input.
inline CholeskyResult cholesky_pivoted(const SymMatrix& m) {
  const int n = m.size();
  CholeskyResult res;
  res.lower = Mat(n);
  if (n == 0) return res;

  // Work on a copy with symmetric row/column pivoting on the diagonal.
  SymMatrix a = m;
  std::array<int, kMaxDim> perm{};
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;

  double max_diag0 = 0.0;
  for (int i = 0; i < n; ++i) max_diag0 = std::max(max_diag0, std::abs(a.at(i, i)));
  const double tol = 1e-13 * std::max(1.0, max_diag0);

  Mat lp(n);  // lower factor in permuted order
  int k = 0;
  for (; k < n; ++k) {
    int piv = k;
    double best = a.at(k, k);
    for (int i = k + 1; i < n; ++i)
      if (a.at(i, i) > best) {
        best = a.at(i, i);
        piv = i;
      }
    if (best <= tol) break;  // remaining block is (numerically) zero or negative
    if (piv != k) {
      std::swap(perm[static_cast<size_t>(piv)], perm[static_cast<size_t>(k)]);
      for (int j = 0; j < n; ++j) {
        double t = a.at(k, j);
        a.at(k, j) = a.at(piv, j);
        a.at(piv, j) = t;
      }
      for (int i = 0; i < n; ++i) {
        double t = a.at(i, k);
        a.at(i, k) = a.at(i, piv);
        a.at(i, piv) = t;
      }
      for (int j = 0; j < k; ++j) {
        double t = lp.at(k, j);
        lp.at(k, j) = lp.at(piv, j);
        lp.at(piv, j) = t;
      }
    }
    double d = std::sqrt(a.at(k, k));
    lp.at(k, k) = d;
    for (int i = k + 1; i < n; ++i) lp.at(i, k) = a.at(i, k) / d;
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j <= i; ++j) {
        double v = a.at(i, j) - lp.at(i, k) * lp.at(j, k);
        a.at(i, j) = v;
        a.at(j, i) = v;
      }
  }
  // Residual block must be negligible, else the matrix was indefinite.
  for (int i = k; i < n; ++i) {
    if (a.at(i, i) < -1e-9 * std::max(1.0, max_diag0))
      throw std::invalid_argument("cholesky: matrix is indefinite");
    for (int j = k; j <= i; ++j)
      if (std::abs(a.at(i, j)) > 1e-7 * std::max(1.0, max_diag0))
        throw std::invalid_argument("cholesky: matrix is indefinite");
  }

  res.rank = k;
  res.degenerate = (k < n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) res.lower.at(perm[static_cast<size_t>(i)], j) = lp.at(i, j);
  return res;
}

}  // namespace detail

/// Cholesky factorization L L^T = M for positive semidefinite M: the
/// classic lower-triangular algorithm, falling back to a pivoted
/// factorization when M is singular (degenerate flag set). Throws on
/// indefinite input.
inline CholeskyResult cholesky(const SymMatrix& m) {
  const int n = m.size();
  double max_diag = 0.0;
  for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(m.at(i, i)));
  const double tol = 1e-13 * std::max(1.0, max_diag);

  CholeskyResult res;
  res.lower = Mat(n);
  res.rank = n;
  for (int j = 0; j < n; ++j) {
    double d = m.at(j, j);
    for (int k = 0; k < j; ++k) d -= res.lower.at(j, k) * res.lower.at(j, k);
    if (d <= tol) return detail::cholesky_pivoted(m);
    d = std::sqrt(d);
    res.lower.at(j, j) = d;
    for (int i = j + 1; i < n; ++i) {
      double s = m.at(i, j);
      for (int k = 0; k < j; ++k) s -= res.lower.at(i, k) * res.lower.at(j, k);
      res.lower.at(i, j) = s / d;
    }
  }
  return res;
}

struct EigenSym {
  Vec values;   // ascending
  Mat vectors;  // columns are eigenvectors, orthonormal
};

/// Cyclic Jacobi eigendecomposition for symmetric matrices up to 4x4.
inline EigenSym eigen_sym(const SymMatrix& m) {
  const int n = m.size();
  SymMatrix a = m;
  Mat v = Mat::identity(n);

  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a.at(i, j)));
  const double tiny = 1e-300;
  if (scale < tiny) scale = 1.0;

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off <= 1e-30 * scale * scale) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        double apq = a.at(p, q);
        if (std::abs(apq) <= 1e-18 * scale) continue;
        double theta = 0.5 * (a.at(q, q) - a.at(p, p)) / apq;
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int i = 0; i < n; ++i) {
          double aip = a.at(i, p), aiq = a.at(i, q);
          a.at(i, p) = c * aip - s * aiq;
          a.at(i, q) = s * aip + c * aiq;
        }
        for (int j = 0; j < n; ++j) {
          double apj = a.at(p, j), aqj = a.at(q, j);
          a.at(p, j) = c * apj - s * aqj;
          a.at(q, j) = s * apj + c * aqj;
        }
        for (int i = 0; i < n; ++i) {
          double vip = v.at(i, p), viq = v.at(i, q);
          v.at(i, p) = c * vip - s * viq;
          v.at(i, q) = s * vip + c * viq;
        }
      }
  }

  EigenSym res;
  res.values = Vec(n);
  res.vectors = Mat(n);
  std::array<int, kMaxDim> idx{};
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  std::sort(idx.begin(), idx.begin() + n,
            [&](int x, int y) { return a.at(x, x) < a.at(y, y); });
  for (int c = 0; c < n; ++c) {
    int src = idx[static_cast<size_t>(c)];
    res.values[c] = a.at(src, src);
    for (int r = 0; r < n; ++r) res.vectors.at(r, c) = v.at(r, src);
  }
  return res;
}

/// Whether a symmetric matrix is PSD up to the repo-wide eigenvalue floor
/// (lambda_min >= -1e-10 * trace).
inline bool is_psd(const SymMatrix& m) {
  if (m.size() == 0) return true;
  EigenSym eig = eigen_sym(m);
  double floor = -1e-10 * std::max(1.0, std::abs(m.trace()));
  return eig.values[0] >= floor;
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix via its
/// eigendecomposition; eigenvalues below rel_tol of the largest are
/// treated as exactly zero.
inline SymMatrix pseudo_inverse(const SymMatrix& m, double rel_tol = 1e-12) {
  const int n = m.size();
  EigenSym eig = eigen_sym(m);
  double lmax = 0.0;
  for (int i = 0; i < n; ++i) lmax = std::max(lmax, std::abs(eig.values[i]));
  double tol = rel_tol * std::max(1.0, lmax);
  SymMatrix r(n);
  for (int k = 0; k < n; ++k) {
    if (std::abs(eig.values[k]) <= tol) continue;
    double inv = 1.0 / eig.values[k];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        r.at(i, j) += inv * eig.vectors.at(i, k) * eig.vectors.at(j, k);
  }
  return r;
}

}  // namespace shadowcert
