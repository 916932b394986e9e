#pragma once

// Standard-form univariate quantiles and CDFs for the supported families.

#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "ellrisk/model.hpp"

namespace ellrisk {

inline void require_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    std::ostringstream os;
    os << "quantile level must lie in (0,1), got " << q;
    throw Error(ErrorCode::InvalidQuantile, os.str());
  }
}

/// Inverse CDF of the standard form (unit location and scale).
inline double standard_quantile(const DistributionKind& kind, double q) {
  require_quantile(q);
  if (kind.is_normal()) return boost::math::quantile(boost::math::normal_distribution<double>(), q);
  return boost::math::quantile(boost::math::students_t_distribution<double>(kind.nu()), q);
}

inline double standard_cdf(const DistributionKind& kind, double z) {
  if (kind.is_normal()) return boost::math::cdf(boost::math::normal_distribution<double>(), z);
  return boost::math::cdf(boost::math::students_t_distribution<double>(kind.nu()), z);
}

}  // namespace ellrisk
