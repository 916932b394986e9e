#pragma once

// Exact conditional law of Y given X = x for Normal and Student-t models.

#include <sstream>

#include "ellrisk/model.hpp"

namespace ellrisk {

/// Law of Y | X = x. The conditional shape is shape_scale * omega_cond_base
/// and the conditional covariance is cov_scale * omega_cond_base.
struct ConditionalModel {
  Vector mu_cond;
  Matrix omega_cond_base;
  DistributionKind kind_cond = DistributionKind::normal();
  double d2x = 0.0;
  double shape_scale = 1.0;
  double cov_scale = 1.0;
  Eigen::Index p_x = 0;

  Matrix shape() const { return shape_scale * omega_cond_base; }
};

namespace detail {

inline void require_length(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << " has length " << v.size() << ", expected " << n;
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

}  // namespace detail

/// (x - mu_x)^T omega_xx^{-1} (x - mu_x) through a triangular solve.
inline double mahalanobis_sq(const Vector& x, const Vector& mu_x, const SpdFactor& omega_xx) {
  detail::require_length(x, omega_xx.size(), "stress vector");
  detail::require_length(mu_x, omega_xx.size(), "location");
  return omega_xx.quadratic_form(x - mu_x);
}

inline double mahalanobis_sq(const Vector& x, const Vector& mu_x, const Matrix& omega_xx) {
  return mahalanobis_sq(x, mu_x, validate_spd(omega_xx));
}

/// Regression operator Omega_YX Omega_XX^{-1} applied to a vector in X space.
inline Vector regress(const Partition& part, const Vector& v) {
  detail::require_length(v, part.p_x(), "stress vector");
  return part.omega_yx * part.xx_factor.solve(v);
}

inline Vector conditional_location(const Partition& part, const Vector& x) {
  return part.mu_y + regress(part, x - part.mu_x);
}

/// Schur complement Omega_YY - Omega_YX Omega_XX^{-1} Omega_XY, symmetrized.
inline Matrix conditional_shape_base(const Partition& part) {
  const Matrix gain = part.xx_factor.solve(part.omega_xy);
  return symmetrized(part.omega_yy - part.omega_yx * gain);
}

inline double student_t_shape_scale(double nu, double d2x, Eigen::Index p_x) {
  return (nu + d2x) / (nu + static_cast<double>(p_x));
}

inline double student_t_cov_scale(double nu, double d2x, Eigen::Index p_x) {
  return (nu + d2x) / (nu + static_cast<double>(p_x) - 2.0);
}

inline ConditionalModel condition(const DistributionKind& kind, const Partition& part,
                                  const Vector& x) {
  ConditionalModel cm;
  cm.p_x = part.p_x();
  cm.d2x = mahalanobis_sq(x, part.mu_x, part.xx_factor);
  cm.mu_cond = conditional_location(part, x);
  cm.omega_cond_base = conditional_shape_base(part);
  if (kind.is_normal()) {
    cm.kind_cond = DistributionKind::normal();
  } else {
    cm.kind_cond = DistributionKind::student_t(kind.nu() + static_cast<double>(part.p_x()));
    cm.shape_scale = student_t_shape_scale(kind.nu(), cm.d2x, part.p_x());
    cm.cov_scale = student_t_cov_scale(kind.nu(), cm.d2x, part.p_x());
  }
  return cm;
}

inline ConditionalModel condition(const EllipticalModel& model, const Partition& part,
                                  const Vector& x) {
  return condition(model.kind(), part, x);
}

inline Matrix conditional_covariance(const ConditionalModel& cm) {
  return cm.cov_scale * cm.omega_cond_base;
}

}  // namespace ellrisk
