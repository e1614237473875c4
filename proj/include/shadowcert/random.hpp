#pragma once

#include <cmath>
#include <cstdint>

#include "shadowcert/linalg.hpp"

namespace shadowcert {

/// Counter-based pseudorandom stream: output i is a fixed hash of
/// (seed, i), so equal seeds give bit-identical sequences and streams
/// split cheaply by deriving child seeds. No global state anywhere.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in (0, 1].
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via the Box-Muller transform (pairs cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Derives an independent child stream; deterministic in (seed, key).
  RngStream split(std::uint64_t key) const {
    std::uint64_t z = seed_ ^ (0xD1B54A32D192ED03ull + key * 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return RngStream(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Draws mu + L z with L L^T = sigma and z i.i.d. standard normal.
/// Callers with a hot loop should factor sigma once and reuse the factor.
inline Vec sample_gaussian_vec(const Vec& mu, const SymMatrix& sigma, RngStream& rng) {
  if (mu.size() != sigma.size())
    throw std::invalid_argument("sample_gaussian: dimension mismatch");
  CholeskyResult f = cholesky(sigma);
  Vec z(mu.size());
  for (int i = 0; i < f.rank; ++i) z[i] = rng.normal();
  Vec out = mu;
  for (int i = 0; i < mu.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < f.rank; ++j) s += f.lower.at(i, j) * z[j];
    out[i] = mu[i] + s;
  }
  return out;
}

}  // namespace shadowcert
