#pragma once

// Stress and systemic-risk measures over a model partition.
//
// Sign convention: models live in log-return space. Stress inputs named
// "losses" are positive magnitudes (loss = -return), so a return-space stress
// point is x = -loss.

#include <cmath>
#include <numbers>
#include <sstream>

#include "ellrisk/conditioning.hpp"
#include "ellrisk/distributions.hpp"

namespace ellrisk {

inline constexpr double kDegenerateEigenTolerance = 1e-8;
inline constexpr double kMutualInformationClamp = 1e-10;

/// mu + quantile(q) * sigma in the family's standard form.
inline double var_univariate(double mu, double sigma, const DistributionKind& kind, double q) {
  require_quantile(q);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    std::ostringstream os;
    os << "scale must be positive, got " << sigma;
    throw Error(ErrorCode::NonPositiveScale, os.str());
  }
  return mu + standard_quantile(kind, q) * sigma;
}

/// CoVaR of variable 1 given variable 0 sits at its own VaR(q_x).
/// Both variables are read in the model's own frame (loss variables).
inline double covar_univariate(const EllipticalModel& model, double q_x, double q_y) {
  if (model.dim() != 2) throw Error(ErrorCode::DimensionMismatch, "CoVaR needs a 2-variable model");
  const double x = var_univariate(model.mu()(0), std::sqrt(model.omega()(0, 0)), model.kind(), q_x);
  const Partition part = build_partition(model, {0}, {1});
  const ConditionalModel cm = condition(model, part, Vector::Constant(1, x));
  const double scale = std::sqrt(cm.shape_scale * cm.omega_cond_base(0, 0));
  return var_univariate(cm.mu_cond(0), scale, cm.kind_cond, q_y);
}

/// Displacement of the conditional location: Omega_YX Omega_XX^{-1} (x - mu_x).
inline Vector centroid_shift(const Partition& part, const Vector& x) {
  return regress(part, x - part.mu_x);
}

enum class LossForm {
  Literal,    // regression operator applied to the VaR losses directly
  Deviation,  // applied to the losses' deviation from the mean loss (-mu_x)
};

/// Mean over Y of the regression operator applied to the VaR loss vector.
inline double average_loss(const Partition& part, const Vector& var_x,
                           LossForm form = LossForm::Literal) {
  detail::require_length(var_x, part.p_x(), "VaR vector");
  const Vector stress = form == LossForm::Literal ? var_x : Vector(var_x + part.mu_x);
  return regress(part, stress).mean();
}

/// Mutual information between X and Y in nats, from shape-block log-determinants.
inline double mutual_information(const Partition& part) {
  const double log_xx = part.xx_factor.log_det();
  const double log_yy = validate_spd(part.omega_yy).log_det();
  const double log_zz = validate_spd(part.joint_omega()).log_det();
  double mi = 0.5 * (log_xx + log_yy - log_zz);
  if (mi < 0.0) {
    if (mi < -kMutualInformationClamp) {
      std::ostringstream os;
      os << "mutual information evaluated to " << mi;
      throw Error(ErrorCode::InternalConsistency, os.str());
    }
    mi = 0.0;
  }
  return mi;
}

struct TopEigen {
  double value = 0.0;
  Vector vector;
};

/// Largest eigenpair of a symmetric matrix. Fails if the leading eigenvalue is
/// not separated from the next one.
inline TopEigen top_eigen(const Matrix& m, const char* what = "matrix") {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::InternalConsistency, std::string("eigensolver failed on ") + what);
  const auto n = m.rows();
  const auto& values = solver.eigenvalues();
  if (n >= 2) {
    const double top = values(n - 1);
    const double next = values(n - 2);
    if (std::abs(top - next) <= kDegenerateEigenTolerance * std::abs(top)) {
      std::ostringstream os;
      os << "top two eigenvalues of " << what << " coincide (" << top << ", " << next << ")";
      throw Error(ErrorCode::DegenerateTopEigenvalue, os.str());
    }
  }
  return {values(n - 1), solver.eigenvectors().col(n - 1)};
}

/// Angle in degrees between two directions, sign-insensitive, in [0, 90].
inline double axis_angle_degrees(const Vector& a, const Vector& b) {
  const Vector u = a.normalized();
  const Vector v = b.normalized();
  const double cosine = std::abs(u.dot(v));
  const double sine = (v - u.dot(v) * u).norm();
  return std::atan2(sine, cosine) * 180.0 / std::numbers::pi;
}

/// Rotation of the principal axis of the Y shape under conditioning.
inline double principal_rotation(const Partition& part) {
  if (part.p_y() == 1) return 0.0;
  const TopEigen before = top_eigen(part.omega_yy, "unconditional shape");
  const TopEigen after = top_eigen(conditional_shape_base(part), "conditional shape");
  return axis_angle_degrees(before.vector, after.vector);
}

/// Degrees of freedom of the joint model a Student-t conditional came from.
inline double joint_nu(const ConditionalModel& cm) {
  return cm.kind_cond.nu() - static_cast<double>(cm.p_x);
}

/// Relative shrinkage of the principal-axis eigenvalue, shape-matrix based.
inline double axis_shrinkage(const Partition& part) {
  const double before = top_eigen(part.omega_yy, "unconditional shape").value;
  const double after = top_eigen(conditional_shape_base(part), "conditional shape").value;
  return (before - after) / before;
}

/// Covariance-based variant: conditional eigenvalue scaled by cov_scale and
/// the unconditional one by the family's covariance factor.
inline double axis_shrinkage(const Partition& part, const ConditionalModel& cm) {
  double before = top_eigen(part.omega_yy, "unconditional shape").value;
  const double after = cm.cov_scale * top_eigen(cm.omega_cond_base, "conditional shape").value;
  if (cm.kind_cond.is_student_t()) {
    const double nu = joint_nu(cm);
    before *= nu / (nu - 2.0);
  }
  return (before - after) / before;
}

inline double beta_factor(const DistributionKind& kind, double d2x, Eigen::Index p_x) {
  if (!(d2x >= 0.0) || p_x < 1) {
    std::ostringstream os;
    os << "beta factor needs d2x >= 0 and p_x >= 1, got d2x=" << d2x << ", p_x=" << p_x;
    throw Error(ErrorCode::InvalidParameters, os.str());
  }
  if (kind.is_normal()) return 1.0;
  const double denom = kind.nu() + static_cast<double>(p_x) - 2.0;
  if (!(denom > 0.0)) throw Error(ErrorCode::InvalidParameters, "nu + p_x - 2 must be positive");
  return (kind.nu() + d2x) / denom;
}

/// Conditional variance of the portfolio w^T Y.
inline double portfolio_conditional_variance(const Partition& part, const Vector& w,
                                             const DistributionKind& kind, double d2x) {
  detail::require_length(w, part.p_y(), "portfolio weights");
  if (w.isZero(0.0)) throw Error(ErrorCode::InvalidParameters, "portfolio weights are all zero");
  const double explained = w.dot(part.omega_yx * part.xx_factor.solve(Vector(part.omega_xy * w)));
  const double residual = std::max(0.0, w.dot(part.omega_yy * w) - explained);
  return beta_factor(kind, d2x, part.p_x()) * residual;
}

/// d^2 of the stress point divided by the number of stressing variables.
inline double mahalanobis_impact_factor(const Partition& part, const Vector& x_star) {
  return mahalanobis_sq(x_star, part.mu_x, part.xx_factor) / static_cast<double>(part.p_x());
}

enum class VarianceReference {
  Covariance,  // |Sigma_YY|x| / |Sigma_YY|, Student-t Sigma_YY = nu/(nu-2) Omega_YY
  Shape,       // |Sigma_YY|x| / |Omega_YY|
};

/// Ratio of conditional to unconditional total variance (covariance determinants).
inline double total_variance_ratio(const Partition& part, const ConditionalModel& cm,
                                   VarianceReference reference = VarianceReference::Covariance) {
  const double p_y = static_cast<double>(part.p_y());
  double log_ratio = validate_spd(cm.omega_cond_base).log_det() +
                     p_y * std::log(cm.cov_scale) - validate_spd(part.omega_yy).log_det();
  if (cm.kind_cond.is_student_t() && reference == VarianceReference::Covariance) {
    const double nu = joint_nu(cm);
    log_ratio -= p_y * std::log(nu / (nu - 2.0));
  }
  return std::exp(log_ratio);
}

}  // namespace ellrisk
