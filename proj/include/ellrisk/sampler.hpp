#pragma once

// Seeded Monte Carlo generation from Normal and Student-t models.
//
// Pinned algorithms, so output is reproducible bit for bit wherever the
// platform's libm is:
//   * engine: std::mt19937_64 (its output sequence is fixed by the C++ standard)
//   * stream seeding: splitmix64(seed ^ splitmix64(stream_index + 1))
//   * uniform: top 53 bits of one engine word, scaled by 2^-53, zero rejected
//   * normal: Marsaglia polar method, spare deviate cached per stream
//   * gamma(a >= 1): Marsaglia-Tsang squeeze/rejection; a < 1 via
//     gamma(a + 1) * U^(1/a); chi-square(nu) = 2 * gamma(nu / 2)
// Rows are produced in blocks of kRowsPerStream; block b uses stream b.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "ellrisk/conditioning.hpp"

namespace ellrisk {

inline constexpr Eigen::Index kRowsPerStream = 4096;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t seed, std::uint64_t stream) : engine_(stream_seed(seed, stream)) {}

  /// Uniform on (0, 1).
  double uniform() {
    for (;;) {
      const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double gamma(double shape) {
    if (shape < 1.0) return gamma(shape + 1.0) * std::pow(uniform(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double z, v;
      do {
        z = normal();
        v = 1.0 + c * z;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * z * z * z * z) return d * v;
      if (std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace detail {

/// Rows [first, first + count) of an elliptical sample from one stream.
inline void fill_block(Eigen::Ref<Matrix> out, const Vector& mu, const Matrix& lower,
                       const DistributionKind& kind, RandomStream& rng) {
  const Eigen::Index p = mu.size();
  Vector g(p);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index i = 0; i < p; ++i) g(i) = rng.normal();
    Vector z = lower.triangularView<Eigen::Lower>() * g;
    if (kind.is_student_t()) z /= std::sqrt(rng.chi_square(kind.nu()) / kind.nu());
    out.row(r) = (mu + z).transpose();
  }
}

}  // namespace detail

/// n draws from the elliptical law with location mu and shape factor `shape`.
/// Deterministic in (seed, n) regardless of `threads`.
inline Matrix sample_elliptical(const Vector& mu, const SpdFactor& shape, const DistributionKind& kind,
                                Eigen::Index n, std::uint64_t seed, unsigned threads = 1) {
  if (n < 1) throw Error(ErrorCode::InvalidParameters, "sample size must be at least 1");
  detail::require_length(mu, shape.size(), "location");
  Matrix out(n, mu.size());
  const Eigen::Index blocks = (n + kRowsPerStream - 1) / kRowsPerStream;
  auto run_block = [&](Eigen::Index b) {
    const Eigen::Index first = b * kRowsPerStream;
    const Eigen::Index count = std::min(kRowsPerStream, n - first);
    RandomStream rng(seed, static_cast<std::uint64_t>(b));
    detail::fill_block(out.middleRows(first, count), mu, shape.lower(), kind, rng);
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks)));
  if (threads == 1) {
    for (Eigen::Index b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (Eigen::Index b = t; b < blocks; b += threads) run_block(b);
      });
  }
  return out;
}

inline Matrix sample(const EllipticalModel& model, Eigen::Index n, std::uint64_t seed,
                     unsigned threads = 1) {
  return sample_elliptical(model.mu(), model.factor(), model.kind(), n, seed, threads);
}

/// Draws straight from the conditional law: Normal with covariance
/// cov_scale * base, or Student-t(nu + p_x) with shape shape_scale * base.
inline Matrix sample_conditional(const ConditionalModel& cm, Eigen::Index n, std::uint64_t seed,
                                 unsigned threads = 1) {
  const double scale = cm.kind_cond.is_normal() ? cm.cov_scale : cm.shape_scale;
  return sample_elliptical(cm.mu_cond, validate_spd(scale * cm.omega_cond_base), cm.kind_cond, n,
                           seed, threads);
}

struct KernelSettings {
  double bandwidth = 0.15;  // half-width, in marginal standard deviations
  Eigen::Index min_retained = 500;
  Eigen::Index draws_per_batch = 200000;
  int max_batches = 64;
};

struct KernelSample {
  Matrix x;  // retained stressing coordinates
  Matrix y;  // matching stressed coordinates
  Eigen::Index draws = 0;
};

/// Joint draws whose X lies within a box of half-width bandwidth * sd around
/// the stress point. Extra batches are drawn until min_retained rows are kept.
inline KernelSample kernel_condition(const EllipticalModel& model, const IndexList& idx_x,
                                     const IndexList& idx_y, const Vector& x, std::uint64_t seed,
                                     const KernelSettings& settings = {}) {
  detail::require_length(x, static_cast<Eigen::Index>(idx_x.size()), "stress point");
  const Vector sd = model.covariance().diagonal().cwiseSqrt();
  std::vector<Vector> kept_x;
  std::vector<Vector> kept_y;
  KernelSample out;
  for (int batch = 0; batch < settings.max_batches; ++batch) {
    const Matrix draws = sample(model, settings.draws_per_batch,
                                stream_seed(seed, 0x6b65726e656cULL + static_cast<std::uint64_t>(batch)));
    out.draws += draws.rows();
    for (Eigen::Index r = 0; r < draws.rows(); ++r) {
      bool inside = true;
      for (std::size_t k = 0; k < idx_x.size() && inside; ++k) {
        const auto c = static_cast<Eigen::Index>(idx_x[k]);
        inside = std::abs(draws(r, c) - x(static_cast<Eigen::Index>(k))) < settings.bandwidth * sd(c);
      }
      if (!inside) continue;
      kept_x.push_back(sub_vector(draws.row(r).transpose(), idx_x));
      kept_y.push_back(sub_vector(draws.row(r).transpose(), idx_y));
    }
    if (static_cast<Eigen::Index>(kept_x.size()) >= settings.min_retained) break;
  }
  if (static_cast<Eigen::Index>(kept_x.size()) < settings.min_retained)
    throw Error(ErrorCode::InvalidParameters, "kernel window retained too few draws");
  out.x.resize(static_cast<Eigen::Index>(kept_x.size()), static_cast<Eigen::Index>(idx_x.size()));
  out.y.resize(static_cast<Eigen::Index>(kept_y.size()), static_cast<Eigen::Index>(idx_y.size()));
  for (std::size_t r = 0; r < kept_x.size(); ++r) {
    out.x.row(static_cast<Eigen::Index>(r)) = kept_x[r].transpose();
    out.y.row(static_cast<Eigen::Index>(r)) = kept_y[r].transpose();
  }
  return out;
}

}  // namespace ellrisk
