#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's factorization, solve or eigen paths.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "ellrisk/model.hpp"
#include "ellrisk/sampler.hpp"

namespace oracle {

using ellrisk::IndexList;
using ellrisk::Matrix;
using ellrisk::Vector;

/// Gauss-Jordan inverse with partial pivoting, written out by hand.
inline Matrix gauss_jordan_inverse(const Matrix& m) {
  const Eigen::Index n = m.rows();
  std::vector<std::vector<double>> a(n, std::vector<double>(2 * n, 0.0));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a[i][j] = m(i, j);
    a[i][n + i] = 1.0;
  }
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = c;
    for (Eigen::Index r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    const double d = a[c][c];
    for (auto& v : a[c]) v /= d;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (Eigen::Index k = 0; k < 2 * n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  Matrix inv(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) inv(i, j) = a[i][n + j];
  return inv;
}

/// Determinant by cofactor expansion along the first row.
inline double cofactor_determinant(const Matrix& m) {
  const Eigen::Index n = m.rows();
  if (n == 1) return m(0, 0);
  if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  double det = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    Matrix minor(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r) {
      Eigen::Index cc = 0;
      for (Eigen::Index c = 0; c < n; ++c) {
        if (c == j) continue;
        minor(r - 1, cc++) = m(r, c);
      }
    }
    det += ((j % 2) ? -1.0 : 1.0) * m(0, j) * cofactor_determinant(minor);
  }
  return det;
}

struct PowerResult {
  double value;
  Vector vector;
};

/// Leading eigenpair of a symmetric positive semidefinite matrix by power iteration.
inline PowerResult power_iteration(const Matrix& m, int max_iter = 2000000, double tol = 1e-15) {
  Vector v = Vector::Ones(m.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += 0.01 * static_cast<double>(i);
  v /= std::sqrt(v.dot(v));
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = Vector::Zero(m.rows());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) w(r) += m(r, c) * v(c);
    const double next = std::sqrt(w.dot(w));
    w /= next;
    const double change = std::min((w - v).norm(), (w + v).norm());
    v = w;
    lambda = next;
    if (change < tol) break;
  }
  return {lambda, v};
}

/// Angle between axes via 2 atan2(|u - v|, |u + v|) on sign-aligned unit vectors.
inline double angle_degrees(const Vector& a, const Vector& b) {
  const Vector u = a / std::sqrt(a.dot(a));
  Vector v = b / std::sqrt(b.dot(b));
  if (u.dot(v) < 0.0) v = -v;
  return 2.0 * std::atan2((u - v).norm(), (u + v).norm()) * 180.0 / std::numbers::pi;
}

inline double bisect(const std::function<double(double)>& f, double target, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_quantile(double q) { return bisect(normal_cdf, q, -40.0, 40.0); }

/// Student-t CDF by composite Simpson integration of the density from 0.
inline double student_t_cdf(double t, double nu) {
  const double k = std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu)) / std::sqrt(nu * std::numbers::pi);
  auto pdf = [&](double x) { return k * std::pow(1.0 + x * x / nu, -0.5 * (nu + 1.0)); };
  const int n = 20000;
  const double h = t / n;
  double s = pdf(0.0) + pdf(t);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
  return 0.5 + s * h / 3.0;
}

inline double student_t_quantile(double q, double nu) {
  return bisect([nu](double t) { return student_t_cdf(t, nu); }, q, -60.0, 60.0);
}

/// Random SPD matrix A A^T + ridge I with entries of order `scale`.
inline Matrix random_spd(ellrisk::RandomStream& rng, Eigen::Index p, double scale = 1.0, double ridge = 0.3) {
  Matrix a(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) a(i, j) = rng.normal();
  Matrix m = a * a.transpose() / static_cast<double>(p) + ridge * Matrix::Identity(p, p);
  return scale * 0.5 * (m + m.transpose());
}

inline Vector random_vector(ellrisk::RandomStream& rng, Eigen::Index p, double scale = 1.0) {
  Vector v(p);
  for (Eigen::Index i = 0; i < p; ++i) v(i) = scale * rng.normal();
  return v;
}

/// Random ordered split of 0..p-1 into non-empty X and Y (everything used).
inline std::pair<IndexList, IndexList> random_split(ellrisk::RandomStream& rng, std::size_t p) {
  IndexList perm(p);
  for (std::size_t i = 0; i < p; ++i) perm[i] = i;
  for (std::size_t i = p - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1)) % (i + 1);
    std::swap(perm[i], perm[j]);
  }
  const auto px = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(p - 1)) % (p - 1);
  return {IndexList(perm.begin(), perm.begin() + static_cast<long>(px)), IndexList(perm.begin() + static_cast<long>(px), perm.end())};
}

inline Matrix pick(const Matrix& m, const IndexList& r, const IndexList& c) {
  Matrix out(r.size(), c.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) out(i, j) = m(r[i], c[j]);
  return out;
}

inline Vector pick(const Vector& v, const IndexList& r) {
  Vector out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out(i) = v(r[i]);
  return out;
}

/// Explicit-inverse evaluation of every measure for one partition.
struct BruteForce {
  Matrix xx, xy, yx, yy;
  Vector mu_x, mu_y;
  Matrix xx_inv;
  Matrix schur;

  BruteForce(const Matrix& omega, const Vector& mu, const IndexList& ix, const IndexList& iy)
      : xx(pick(omega, ix, ix)), xy(pick(omega, ix, iy)), yx(pick(omega, iy, ix)), yy(pick(omega, iy, iy)),
        mu_x(pick(mu, ix)), mu_y(pick(mu, iy)) {
    xx_inv = gauss_jordan_inverse(xx);
    schur = yy - yx * xx_inv * xy;
  }

  double d2(const Vector& x) const { return (x - mu_x).dot(xx_inv * (x - mu_x)); }
  Vector shift(const Vector& x) const { return yx * xx_inv * (x - mu_x); }
  double average_loss(const Vector& var) const { return (yx * xx_inv * var).mean(); }
  double mutual_information() const {
    Matrix z(xx.rows() + yy.rows(), xx.rows() + yy.rows());
    z << xx, xy, yx, yy;
    return 0.5 * std::log(cofactor_determinant(xx) * cofactor_determinant(yy) / cofactor_determinant(z));
  }
  double rotation() const {
    if (yy.rows() == 1) return 0.0;
    return angle_degrees(power_iteration(yy).vector, power_iteration(schur).vector);
  }
  double shrinkage(double cov_before = 1.0, double cov_after = 1.0) const {
    const double before = cov_before * power_iteration(yy).value;
    const double after = cov_after * power_iteration(schur).value;
    return (before - after) / before;
  }
  double portfolio_variance(const Vector& w, double beta) const {
    return beta * (w.dot(yy * w) - w.dot(yx * xx_inv * xy * w));
  }
  double total_variance_ratio(double cov_after, double cov_before) const {
    const double p = static_cast<double>(yy.rows());
    return std::pow(cov_after / cov_before, p) * cofactor_determinant(schur) / cofactor_determinant(yy);
  }
};

}  // namespace oracle
