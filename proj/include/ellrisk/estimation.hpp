#pragma once

// From price panels to fitted elliptical models.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ellrisk/distributions.hpp"
#include "ellrisk/model.hpp"

namespace ellrisk {

inline constexpr double kNuLowerClamp = 4.5;
inline constexpr double kNuUpperClamp = 50.0;

/// Date-indexed log-returns, one column per ticker.
struct ReturnPanel {
  std::vector<std::string> dates;  // date of each return row (the later price date)
  std::vector<std::string> tickers;
  Matrix returns;
  std::map<std::string, std::string> groups;  // ticker -> group, may be empty

  Eigen::Index periods() const noexcept { return returns.rows(); }
  Eigen::Index width() const noexcept { return returns.cols(); }
};

inline Matrix log_returns(const Matrix& prices, const std::vector<std::string>& tickers = {},
                          const std::vector<std::string>& dates = {}) {
  if (prices.rows() < 2) throw Error(ErrorCode::InvalidParameters, "need at least two price rows");
  for (Eigen::Index t = 0; t < prices.rows(); ++t) {
    for (Eigen::Index i = 0; i < prices.cols(); ++i) {
      const double v = prices(t, i);
      if (v > 0.0 && std::isfinite(v)) continue;
      std::ostringstream os;
      os << "price " << v << " for "
         << (static_cast<std::size_t>(i) < tickers.size() ? tickers[i] : "column " + std::to_string(i))
         << " on " << (static_cast<std::size_t>(t) < dates.size() ? dates[t] : "row " + std::to_string(t));
      throw Error(ErrorCode::NonPositivePrice, os.str());
    }
  }
  const Eigen::Index n = prices.rows() - 1;
  return (prices.bottomRows(n).array() / prices.topRows(n).array()).log().matrix();
}

/// Type-7 sample quantile (linear interpolation between order statistics).
inline double empirical_quantile(std::vector<double> values, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::InvalidQuantile, "quantile outside [0,1]");
  if (values.empty()) throw Error(ErrorCode::EmptySet, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Per-variable loss at VaR level q: the negated (1-q) return quantile, floored at 0.
inline Vector empirical_var_vector(const ReturnPanel& panel, const IndexList& idx, double q) {
  require_quantile(q);
  Vector out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= static_cast<std::size_t>(panel.width()))
      throw Error(ErrorCode::IndexOutOfRange, "VaR column index out of range");
    const auto col = panel.returns.col(static_cast<Eigen::Index>(idx[k]));
    std::vector<double> values(col.data(), col.data() + col.size());
    out(static_cast<Eigen::Index>(k)) = std::max(0.0, -empirical_quantile(std::move(values), 1.0 - q));
  }
  return out;
}

inline Vector empirical_var_vector(const ReturnPanel& panel, double q) {
  IndexList all(static_cast<std::size_t>(panel.width()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return empirical_var_vector(panel, all, q);
}

namespace detail {

inline void require_fit_shape(const ReturnPanel& panel) {
  if (panel.width() < 1) throw Error(ErrorCode::EmptySet, "panel has no columns");
  if (panel.periods() < panel.width() + 2) {
    std::ostringstream os;
    os << "need at least p + 2 = " << panel.width() + 2 << " return rows, have " << panel.periods();
    throw Error(ErrorCode::RankDeficient, os.str());
  }
  if (!panel.returns.allFinite()) throw Error(ErrorCode::InvalidParameters, "returns contain non-finite values");
}

/// Validates a fitted covariance; on failure names the most correlated column pair.
inline void require_full_rank(const Matrix& cov, const std::vector<std::string>& tickers) {
  try {
    validate_spd(cov);
  } catch (const Error& e) {
    double worst = -1.0;
    Eigen::Index wi = 0, wj = 0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < cov.cols(); ++j) {
        const double denom = std::sqrt(cov(i, i) * cov(j, j));
        const double corr = denom > 0.0 ? std::abs(cov(i, j)) / denom : 1.0;
        if (corr > worst) {
          worst = corr;
          wi = i;
          wj = j;
        }
      }
    }
    std::ostringstream os;
    os << "sample covariance is not positive definite (" << e.what() << ")";
    if (cov.rows() >= 2) {
      auto name = [&](Eigen::Index k) {
        return static_cast<std::size_t>(k) < tickers.size() ? tickers[k] : std::to_string(k);
      };
      os << "; most collinear pair " << name(wi) << "/" << name(wj) << " with |corr| " << worst;
    }
    throw Error(ErrorCode::RankDeficient, os.str());
  }
}

}  // namespace detail

inline EllipticalModel fit_gaussian(const ReturnPanel& panel) {
  detail::require_fit_shape(panel);
  Vector mu = panel.returns.colwise().mean().transpose();
  Matrix cov = sample_covariance(panel.returns);
  detail::require_full_rank(cov, panel.tickers);
  return EllipticalModel(std::move(mu), std::move(cov), DistributionKind::normal(), panel.tickers);
}

/// Per-column excess kurtosis m4 / m2^2 - 3 with population central moments.
inline Vector excess_kurtosis(const Matrix& x) {
  const Matrix centered = x.rowwise() - x.colwise().mean();
  Vector out(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double m2 = centered.col(i).array().square().mean();
    const double m4 = centered.col(i).array().square().square().mean();
    out(i) = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  }
  return out;
}

/// Moment-matching estimate nu = 4 + 6 / mean excess kurtosis, clamped to [4.5, 50].
inline double estimate_nu(const Matrix& returns) {
  const double kappa = excess_kurtosis(returns).mean();
  if (!(kappa > 0.0)) {
    std::ostringstream os;
    os << "mean excess kurtosis " << kappa << " is not positive; fit a Normal model instead";
    throw Error(ErrorCode::KurtosisTooLow, os.str());
  }
  return std::clamp(4.0 + 6.0 / kappa, kNuLowerClamp, kNuUpperClamp);
}

/// Student-t fit: sample covariance rescaled to a shape matrix by (nu-2)/nu.
inline EllipticalModel fit_student_t(const ReturnPanel& panel, std::optional<double> nu = std::nullopt) {
  detail::require_fit_shape(panel);
  if (nu && !(*nu > 2.0 && std::isfinite(*nu))) {
    std::ostringstream os;
    os << "supplied nu must exceed 2, got " << *nu;
    throw Error(ErrorCode::InvalidNu, os.str());
  }
  const double dof = nu ? *nu : estimate_nu(panel.returns);
  Vector mu = panel.returns.colwise().mean().transpose();
  Matrix cov = sample_covariance(panel.returns);
  detail::require_full_rank(cov, panel.tickers);
  return EllipticalModel(std::move(mu), ((dof - 2.0) / dof) * cov, DistributionKind::student_t(dof),
                         panel.tickers);
}

struct GroupIndex {
  std::map<std::string, IndexList> groups;  // sorted by group name
  std::vector<std::string> warnings;
};

/// Group name -> column indices in panel order. Every ticker must be mapped.
inline GroupIndex group_indices(const ReturnPanel& panel) {
  if (panel.groups.empty()) throw Error(ErrorCode::UnmappedTicker, "panel has no group map");
  GroupIndex out;
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < panel.tickers.size(); ++i) {
    const auto it = panel.groups.find(panel.tickers[i]);
    if (it == panel.groups.end()) {
      missing.push_back(panel.tickers[i]);
      continue;
    }
    out.groups[it->second].push_back(i);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(ErrorCode::UnmappedTicker, "tickers without a group: " + list);
  }
  std::vector<std::string> extras;
  for (const auto& [ticker, group] : panel.groups) {
    if (std::find(panel.tickers.begin(), panel.tickers.end(), ticker) == panel.tickers.end())
      extras.push_back(ticker);
  }
  if (!extras.empty()) {
    std::string list;
    for (const auto& e : extras) list += (list.empty() ? "" : ", ") + e;
    out.warnings.push_back("group map lists tickers absent from the panel (ignored): " + list);
  }
  return out;
}

}  // namespace ellrisk
