#pragma once

// Generator for the bundled synthetic panel: 60 equities in 10 sectors drawn
// from a known block-structured Student-t(8) model, so pipeline outputs can be
// checked against ground truth.

#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "ellrisk/sampler.hpp"

namespace ellrisk {

struct SyntheticSpec {
  std::uint64_t seed = 42;
  Eigen::Index periods = 2000;  // returns; prices have one more row
  Eigen::Index per_group = 6;
  double nu = 8.0;
};

struct SyntheticDataset {
  std::vector<std::string> dates;  // price dates
  std::vector<std::string> tickers;
  std::map<std::string, std::string> groups;
  Matrix prices;
  EllipticalModel truth;
};

namespace detail {

struct SectorProfile {
  const char* name;
  const char* prefix;
  double vol;     // daily return standard deviation
  double market;  // loading on the common factor
  double sector;  // loading on the sector factor
};

inline constexpr std::array<SectorProfile, 10> kSectors = {{
    {"basic_materials", "BAS", 0.020, 0.70, 0.50},
    {"consumer_goods", "CGD", 0.011, 0.75, 0.40},
    {"consumer_services", "CSV", 0.012, 0.80, 0.35},
    {"financials", "FIN", 0.018, 0.75, 0.45},
    {"health_care", "HLT", 0.010, 0.55, 0.55},
    {"industrials", "IND", 0.014, 0.80, 0.40},
    {"oil_gas", "OIL", 0.024, 0.55, 0.65},
    {"technology", "TEC", 0.016, 0.70, 0.50},
    {"telecommunications", "TEL", 0.008, 0.45, 0.60},
    {"utilities", "UTL", 0.007, 0.35, 0.70},
}};

/// Weekdays starting at 2012-01-02.
inline std::vector<std::string> business_days(std::size_t count) {
  using namespace std::chrono;
  std::vector<std::string> out;
  sys_days day = year{2012} / January / 2;
  while (out.size() < count) {
    const weekday wd{day};
    if (wd != Saturday && wd != Sunday) {
      const year_month_day ymd{day};
      char buf[16];
      std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                    static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
      out.emplace_back(buf);
    }
    day += days{1};
  }
  return out;
}

}  // namespace detail

/// The generator's true model: correlation from a market factor plus one
/// factor per sector, scaled by per-ticker volatilities, as a Student-t shape.
inline EllipticalModel synthetic_truth(const SyntheticSpec& spec, std::vector<std::string>& tickers,
                                       std::map<std::string, std::string>& groups) {
  const auto g = static_cast<Eigen::Index>(detail::kSectors.size());
  const Eigen::Index p = g * spec.per_group;
  RandomStream rng(spec.seed, 0x73796e7468ULL);
  Vector vol(p), market(p), sector(p), mu(p);
  std::vector<Eigen::Index> group_of(static_cast<std::size_t>(p));
  tickers.clear();
  groups.clear();
  for (Eigen::Index k = 0; k < g; ++k) {
    const auto& s = detail::kSectors[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < spec.per_group; ++j) {
      const Eigen::Index i = k * spec.per_group + j;
      group_of[static_cast<std::size_t>(i)] = k;
      vol(i) = s.vol * (0.8 + 0.4 * rng.uniform());
      market(i) = s.market + 0.1 * (rng.uniform() - 0.5);
      sector(i) = s.sector + 0.1 * (rng.uniform() - 0.5);
      mu(i) = 0.0004 * rng.uniform();
      char name[16];
      std::snprintf(name, sizeof name, "%s%d", s.prefix, static_cast<int>(j + 1));
      tickers.emplace_back(name);
      groups[name] = s.name;
    }
  }
  Matrix corr(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      double c = market(i) * market(j);
      if (group_of[static_cast<std::size_t>(i)] == group_of[static_cast<std::size_t>(j)]) c += sector(i) * sector(j);
      if (i == j) c = 1.0;
      corr(i, j) = c;
    }
  }
  const Matrix cov = vol.asDiagonal() * corr * vol.asDiagonal();
  return EllipticalModel(mu, ((spec.nu - 2.0) / spec.nu) * cov, DistributionKind::student_t(spec.nu), tickers);
}

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec = {}) {
  std::vector<std::string> tickers;
  std::map<std::string, std::string> groups;
  EllipticalModel truth = synthetic_truth(spec, tickers, groups);
  const Matrix returns = sample(truth, spec.periods, spec.seed);
  Matrix prices(spec.periods + 1, truth.dim());
  prices.row(0).setConstant(100.0);
  for (Eigen::Index t = 0; t < spec.periods; ++t)
    prices.row(t + 1) = (prices.row(t).array() * returns.row(t).array().exp()).matrix();
  return {detail::business_days(static_cast<std::size_t>(spec.periods + 1)), std::move(tickers), std::move(groups),
          std::move(prices), std::move(truth)};
}

}  // namespace ellrisk
