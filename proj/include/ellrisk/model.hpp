#pragma once

// Domain types for elliptical models and variable partitions, plus the
// symmetric positive definite factorization everything else is built on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ellrisk/error.hpp"

namespace ellrisk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexList = std::vector<std::size_t>;

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kPivotTolerance = 1e-12;

/// Normal, or Student-t with nu > 2 degrees of freedom.
class DistributionKind {
 public:
  enum class Family { Normal, StudentT };

  static DistributionKind normal() { return DistributionKind(Family::Normal, 0.0); }

  static DistributionKind student_t(double nu) {
    if (!(nu > 2.0) || !std::isfinite(nu)) {
      std::ostringstream os;
      os << "Student-t degrees of freedom must be finite and > 2, got " << nu;
      throw Error(ErrorCode::InvalidNu, os.str());
    }
    return DistributionKind(Family::StudentT, nu);
  }

  Family family() const noexcept { return family_; }
  bool is_normal() const noexcept { return family_ == Family::Normal; }
  bool is_student_t() const noexcept { return family_ == Family::StudentT; }

  /// Degrees of freedom; only meaningful for Student-t.
  double nu() const noexcept { return nu_; }

  /// Ratio between covariance and shape matrix: 1 or nu/(nu-2).
  double covariance_factor() const noexcept { return is_normal() ? 1.0 : nu_ / (nu_ - 2.0); }

  std::string name() const { return is_normal() ? "normal" : "student_t"; }

  friend bool operator==(const DistributionKind& a, const DistributionKind& b) {
    return a.family_ == b.family_ && (a.is_normal() || a.nu_ == b.nu_);
  }

 private:
  DistributionKind(Family family, double nu) : family_(family), nu_(nu) {}

  Family family_;
  double nu_;
};

/// Cholesky factor of an SPD matrix with its log-determinant.
class SpdFactor {
 public:
  SpdFactor() = default;
  SpdFactor(Matrix lower, double log_det) : lower_(std::move(lower)), log_det_(log_det) {}

  Eigen::Index size() const noexcept { return lower_.rows(); }
  const Matrix& lower() const noexcept { return lower_; }
  double log_det() const noexcept { return log_det_; }

  Vector solve(const Vector& rhs) const {
    Vector y = lower_.triangularView<Eigen::Lower>().solve(rhs);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  Matrix solve(const Matrix& rhs) const {
    Matrix y = lower_.triangularView<Eigen::Lower>().solve(rhs);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  /// v^T M^{-1} v evaluated as |L^{-1} v|^2.
  double quadratic_form(const Vector& v) const {
    Vector y = lower_.triangularView<Eigen::Lower>().solve(v);
    return y.squaredNorm();
  }

 private:
  Matrix lower_;
  double log_det_ = 0.0;
};

/// Largest element-wise asymmetry relative to the entry scale.
inline double relative_asymmetry(const Matrix& m) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      const double a = m(i, j);
      const double b = m(j, i);
      const double scale =
          std::max({std::abs(a), std::abs(b), std::sqrt(std::abs(m(i, i) * m(j, j)))});
      const double diff = std::abs(a - b);
      if (diff == 0.0) continue;
      worst = std::max(worst, scale > 0.0 ? diff / scale : INFINITY);
    }
  }
  return worst;
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Checks symmetry, then factors. Pivots below kPivotTolerance times the
/// largest diagonal are rejected as near-singular.
inline SpdFactor validate_spd(const Matrix& m) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << "matrix is " << m.rows() << "x" << m.cols() << ", expected square";
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  const Eigen::Index n = m.rows();
  if (n == 0) throw Error(ErrorCode::EmptySet, "cannot factor an empty matrix");
  if (!m.allFinite()) throw NotPositiveDefiniteError(0, "matrix has non-finite entries");
  const double asym = relative_asymmetry(m);
  if (asym > kSymmetryTolerance) {
    std::ostringstream os;
    os << "relative asymmetry " << asym << " exceeds " << kSymmetryTolerance;
    throw Error(ErrorCode::NotSymmetric, os.str());
  }
  const Matrix a = symmetrized(m);
  const double max_diag = a.diagonal().maxCoeff();
  const double floor = kPivotTolerance * std::max(max_diag, 0.0);

  Matrix lower = Matrix::Zero(n, n);
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j) - lower.row(j).head(j).squaredNorm();
    if (!(pivot > floor) || !(pivot > 0.0)) {
      std::ostringstream os;
      os << "factorization failed at pivot " << j << " (value " << pivot << ")";
      throw NotPositiveDefiniteError(static_cast<long>(j), os.str());
    }
    const double ljj = std::sqrt(pivot);
    lower(j, j) = ljj;
    log_det += std::log(pivot);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      lower(i, j) = (a(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j))) / ljj;
    }
  }
  return SpdFactor(std::move(lower), log_det);
}

/// Jointly fitted location, shape matrix and family. Immutable once built.
class EllipticalModel {
 public:
  EllipticalModel(Vector mu, Matrix omega, DistributionKind kind, std::vector<std::string> labels = {})
      : mu_(std::move(mu)), kind_(kind), labels_(std::move(labels)) {
    const auto p = mu_.size();
    if (omega.rows() != p || omega.cols() != p) {
      std::ostringstream os;
      os << "location has length " << p << " but shape matrix is " << omega.rows() << "x"
         << omega.cols();
      throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    if (labels_.empty()) {
      for (Eigen::Index i = 0; i < p; ++i) labels_.push_back("v" + std::to_string(i));
    } else if (static_cast<Eigen::Index>(labels_.size()) != p) {
      throw Error(ErrorCode::DimensionMismatch, "label count does not match dimension");
    }
    if (!mu_.allFinite()) throw Error(ErrorCode::InvalidParameters, "location has non-finite entries");
    factor_ = validate_spd(omega);
    omega_ = symmetrized(omega);
  }

  Eigen::Index dim() const noexcept { return mu_.size(); }
  const Vector& mu() const noexcept { return mu_; }
  const Matrix& omega() const noexcept { return omega_; }
  const DistributionKind& kind() const noexcept { return kind_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const SpdFactor& factor() const noexcept { return factor_; }

  /// Covariance matrix; equals omega for the Normal.
  Matrix covariance() const { return kind_.covariance_factor() * omega_; }

 private:
  Vector mu_;
  Matrix omega_;
  DistributionKind kind_;
  std::vector<std::string> labels_;
  SpdFactor factor_;
};

/// Split of the variables into stressing set X and stressed set Y.
/// Variables outside both sets are marginalized out by dropping them.
struct Partition {
  IndexList idx_x;
  IndexList idx_y;
  Matrix omega_xx;
  Matrix omega_xy;
  Matrix omega_yx;
  Matrix omega_yy;
  Vector mu_x;
  Vector mu_y;
  SpdFactor xx_factor;

  Eigen::Index p_x() const noexcept { return static_cast<Eigen::Index>(idx_x.size()); }
  Eigen::Index p_y() const noexcept { return static_cast<Eigen::Index>(idx_y.size()); }

  /// Shape matrix of (X, Y) in partition order.
  Matrix joint_omega() const {
    Matrix z(p_x() + p_y(), p_x() + p_y());
    z << omega_xx, omega_xy, omega_yx, omega_yy;
    return z;
  }
};

inline Matrix sub_matrix(const Matrix& m, const IndexList& rows, const IndexList& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          m(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(cols[j]));
  return out;
}

inline Vector sub_vector(const Vector& v, const IndexList& idx) {
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline Vector column_means(const Matrix& draws) { return draws.colwise().mean().transpose(); }

/// Sample covariance with 1/(n-1) normalization, symmetrized.
inline Matrix sample_covariance(const Matrix& draws) {
  const Matrix centered = draws.rowwise() - draws.colwise().mean();
  return symmetrized((centered.transpose() * centered) / static_cast<double>(draws.rows() - 1));
}

namespace detail {

inline std::string describe_subset(const std::vector<std::string>& labels, const IndexList& idx) {
  std::string out = "{";
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) out += ",";
    out += idx[i] < labels.size() ? labels[idx[i]] : std::to_string(idx[i]);
  }
  return out + "}";
}

}  // namespace detail

inline Partition build_partition(const Matrix& omega, const Vector& mu, const IndexList& idx_x,
                                 const IndexList& idx_y,
                                 const std::vector<std::string>& labels = {}) {
  if (idx_x.empty()) throw Error(ErrorCode::EmptySet, "stressing set X is empty");
  if (idx_y.empty()) throw Error(ErrorCode::EmptySet, "stressed set Y is empty");
  const auto p = static_cast<std::size_t>(mu.size());
  std::vector<int> seen(p, 0);
  auto mark = [&](const IndexList& idx, int tag) {
    for (auto i : idx) {
      if (i >= p) {
        std::ostringstream os;
        os << "index " << i << " outside 0.." << p;
        throw Error(ErrorCode::IndexOutOfRange, os.str());
      }
      if (seen[i] != 0) {
        std::ostringstream os;
        os << "index " << i << (seen[i] == tag ? " repeated" : " appears in both X and Y");
        throw Error(ErrorCode::OverlappingSets, os.str());
      }
      seen[i] = tag;
    }
  };
  mark(idx_x, 1);
  mark(idx_y, 2);

  Partition part;
  part.idx_x = idx_x;
  part.idx_y = idx_y;
  part.omega_xx = sub_matrix(omega, idx_x, idx_x);
  part.omega_xy = sub_matrix(omega, idx_x, idx_y);
  part.omega_yx = part.omega_xy.transpose();
  part.omega_yy = sub_matrix(omega, idx_y, idx_y);
  part.mu_x = sub_vector(mu, idx_x);
  part.mu_y = sub_vector(mu, idx_y);
  try {
    part.xx_factor = validate_spd(part.omega_xx);
  } catch (const NotPositiveDefiniteError& e) {
    throw NotPositiveDefiniteError(
        e.pivot(), "shape block of stressing set " + detail::describe_subset(labels, idx_x) +
                       " is singular or near-singular: " + e.what());
  }
  return part;
}

inline Partition build_partition(const EllipticalModel& model, const IndexList& idx_x,
                                 const IndexList& idx_y) {
  return build_partition(model.omega(), model.mu(), idx_x, idx_y, model.labels());
}

/// Marginal model of the listed variables (same family, sub-blocks of mu and omega).
inline EllipticalModel marginal(const EllipticalModel& model, const IndexList& idx) {
  std::vector<std::string> labels;
  for (auto i : idx) {
    if (i >= static_cast<std::size_t>(model.dim()))
      throw Error(ErrorCode::IndexOutOfRange, "marginal index out of range");
    labels.push_back(model.labels()[i]);
  }
  return EllipticalModel(sub_vector(model.mu(), idx), sub_matrix(model.omega(), idx, idx),
                         model.kind(), std::move(labels));
}

}  // namespace ellrisk
