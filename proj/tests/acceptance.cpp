// Acceptance suite: one PASS/FAIL line per criterion.
//
//   ellrisk_acceptance            run every criterion
//   ellrisk_acceptance 3 9        run a subset
//   ellrisk_acceptance --bless    rewrite the pinned pipeline outputs in tests/golden

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>

#include "ellrisk/cli.hpp"
#include "oracles.hpp"

using namespace ellrisk;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

bool g_bless = false;

const fs::path kSource = ELLRISK_SOURCE_DIR;
const fs::path kGolden = kSource / "tests" / "golden";
const fs::path kData = kSource / "data" / "synthetic";

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-10); }

/// Kolmogorov-Smirnov distance between a sample and a CDF.
double ks_distance(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
  }
  return d;
}

// ---------------------------------------------------------------------------
// 1 and 2: kernel-conditioned Monte Carlo against the conditional law.
//
// Draws are retained when X falls in a small box around the stress point.
// Each retained y_i is compared with the law at its own x_i, so box width
// adds no bias: residuals y_i - mu(x_i) have mean 0 and second moment
// cov_scale(x_i) * base.

struct KernelStats {
  double max_z = 0.0;
  std::vector<double> z;
  double max_cov_err = 0.0;
  Eigen::Index min_retained = 0;
  std::vector<double> q_stats;  // residual quadratic forms / p_y, Student-t only
  double max_direct_err = 0.0;
};

KernelStats kernel_protocol(const DistributionKind& kind, int models) {
  KernelStats st;
  st.min_retained = std::numeric_limits<Eigen::Index>::max();
  for (int m = 0; m < models; ++m) {
    RandomStream rng(2026, static_cast<std::uint64_t>(m) + (kind.is_normal() ? 0 : 1000));
    const EllipticalModel model(oracle::random_vector(rng, 5, 0.5), oracle::random_spd(rng, 5), kind);
    const IndexList ix = {0}, iy = {1, 2, 3, 4};
    const Partition part = build_partition(model, ix, iy);
    const Vector x0 = part.mu_x.array() + std::sqrt(model.covariance()(0, 0));
    const KernelSample ks = kernel_condition(model, ix, iy, x0, 5000 + static_cast<std::uint64_t>(m));
    const Eigen::Index n = ks.y.rows();
    st.min_retained = std::min(st.min_retained, n);

    const Matrix base = conditional_shape_base(part);
    const SpdFactor base_f = validate_spd(base);
    Matrix resid(n, 4);
    double scale_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const ConditionalModel cm = condition(model, part, ks.x.row(i).transpose());
      resid.row(i) = ks.y.row(i) - cm.mu_cond.transpose();
      scale_sum += cm.cov_scale;
      if (kind.is_student_t())
        st.q_stats.push_back(base_f.quadratic_form(resid.row(i).transpose()) / cm.shape_scale / 4.0);
    }
    const Vector mean = resid.colwise().mean().transpose();
    const Matrix second = resid.transpose() * resid / static_cast<double>(n);
    for (Eigen::Index k = 0; k < 4; ++k) {
      const double var = second(k, k) - mean(k) * mean(k);
      st.z.push_back(mean(k) / std::sqrt(var / static_cast<double>(n)));
      st.max_z = std::max(st.max_z, std::abs(st.z.back()));
    }
    const Matrix expected = (scale_sum / static_cast<double>(n)) * base;
    st.max_cov_err = std::max(st.max_cov_err, (second - expected).norm() / expected.norm());

    if (kind.is_student_t()) {
      const ConditionalModel cm = condition(model, part, x0);
      const Matrix direct = sample_conditional(cm, 200000, 9000 + static_cast<std::uint64_t>(m));
      const Matrix target = conditional_covariance(cm);
      st.max_direct_err = std::max(st.max_direct_err, (sample_covariance(direct) - target).norm() / target.norm());
    }
  }
  return st;
}

// How many of the per-component z scores exceed 3, against the count expected by chance.
std::string z_summary(const KernelStats& st) {
  const auto over = std::count_if(st.z.begin(), st.z.end(), [](double z) { return std::abs(z) > 3.0; });
  const double expected = static_cast<double>(st.z.size()) * std::erfc(3.0 / std::sqrt(2.0));
  const double d = ks_distance(st.z, [](double z) { return oracle::normal_cdf(z); });
  return " (" + std::to_string(over) + " of " + std::to_string(st.z.size()) + " beyond 3, " + fmt(expected) +
         " expected by chance; KS vs N(0,1) " + fmt(d) + ")";
}

Outcome criterion_1() {
  const KernelStats st = kernel_protocol(DistributionKind::normal(), 50);
  const bool pass = st.max_z < 3.0 && st.max_cov_err < 0.05;
  return {pass, "50 models, >=" + std::to_string(st.min_retained) + " retained each, max |mean z| " +
                    fmt(st.max_z) + " (< 3)" + z_summary(st) + ", max covariance error " + fmt(100 * st.max_cov_err) + "% (< 5%)"};
}

Outcome criterion_2() {
  const double nu = 6.0;
  const KernelStats st = kernel_protocol(DistributionKind::student_t(nu), 50);
  // Given X = x_i the residual form Q_i follows F(p_y, nu + p_x).
  const boost::math::fisher_f updated(4.0, nu + 1.0), stale(4.0, nu);
  const double d_upd = ks_distance(st.q_stats, [&](double q) { return boost::math::cdf(updated, q); });
  const double d_old = ks_distance(st.q_stats, [&](double q) { return boost::math::cdf(stale, q); });
  const double crit = 1.63 / std::sqrt(static_cast<double>(st.q_stats.size()));  // 1% level
  const bool pass = st.max_z < 3.0 && st.max_cov_err < 0.05 && d_upd < crit && d_old > crit && st.max_direct_err < 0.05;
  return {pass, "50 models, max |mean z| " + fmt(st.max_z) + " (< 3)" + z_summary(st) + ", kernel covariance error " + fmt(100 * st.max_cov_err) +
                    "%, KS vs F(4,nu+1) " + fmt(d_upd) + " / vs F(4,nu) " + fmt(d_old) + " (critical " + fmt(crit) +
                    "), direct-sampling covariance error " + fmt(100 * st.max_direct_err) + "%"};
}

// ---------------------------------------------------------------------------

Outcome criterion_3() {
  RandomStream rng(2026, 3);
  double worst = 0.0;
  bool nu_ok = true;
  for (int t = 0; t < 1000; ++t) {
    const double rho = 1.98 * rng.uniform() - 0.99;
    const double sx = 0.1 + 2 * rng.uniform(), sy = 0.1 + 2 * rng.uniform();
    const double mx = rng.normal(), my = rng.normal(), x = mx + 3 * sx * rng.normal();
    const double nu = 2.5 + 30 * rng.uniform();
    Matrix om(2, 2);
    om << sx * sx, rho * sx * sy, rho * sx * sy, sy * sy;
    Vector mu(2);
    mu << mx, my;
    const Partition part = build_partition(om, mu, {0}, {1});
    const Vector xv = Vector::Constant(1, x);
    const ConditionalModel cn = condition(DistributionKind::normal(), part, xv);
    const ConditionalModel ct = condition(DistributionKind::student_t(nu), part, xv);

    const double shift = rho * sy / sx * (x - mx);
    const double mean = my + shift;
    const double var = (1 - rho * rho) * sy * sy;
    const double d2 = (x - mx) * (x - mx) / (sx * sx);
    const double t_scale = (nu + d2) / (nu + 1) * var;
    worst = std::max({worst, std::abs(cn.mu_cond(0) - mean) / (1 + std::abs(my) + std::abs(shift)),
                      std::abs(ct.mu_cond(0) - mean) / (1 + std::abs(my) + std::abs(shift)),
                      std::abs(conditional_covariance(cn)(0, 0) - var) / (1 + var),
                      std::abs(ct.shape()(0, 0) - t_scale) / (1 + t_scale)});
    nu_ok = nu_ok && ct.kind_cond.nu() == nu + 1.0;
  }
  return {worst <= 1e-12 && nu_ok, "1000 parameterizations, worst scaled error " + fmt(worst) + " (<= 1e-12), nu+1 update " +
                                       (nu_ok ? "exact" : "WRONG")};
}

Outcome criterion_4() {
  RandomStream rng(2026, 4);
  double min_mi = INFINITY, max_indep = 0.0, min_coupled = INFINITY, worst_biv = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto p = static_cast<std::size_t>(2 + t % 5);
    const Matrix om = oracle::random_spd(rng, static_cast<Eigen::Index>(p));
    const auto [ix, iy] = oracle::random_split(rng, p);
    const double mi = mutual_information(build_partition(om, Vector::Zero(static_cast<Eigen::Index>(p)), ix, iy));
    min_mi = std::min(min_mi, mi);
    min_coupled = std::min(min_coupled, mi);  // random shapes always couple X and Y
    Matrix block = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    const auto px = static_cast<Eigen::Index>(ix.size()), py = static_cast<Eigen::Index>(iy.size());
    block.topLeftCorner(px, px) = oracle::random_spd(rng, px);
    block.bottomRightCorner(py, py) = oracle::random_spd(rng, py);
    IndexList bx, by;
    for (Eigen::Index i = 0; i < px; ++i) bx.push_back(static_cast<std::size_t>(i));
    for (Eigen::Index i = 0; i < py; ++i) by.push_back(static_cast<std::size_t>(px + i));
    max_indep = std::max(max_indep, mutual_information(build_partition(block, Vector::Zero(px + py), bx, by)));
  }
  for (int k = -99; k <= 99; ++k) {
    const double rho = k / 100.0;
    const double sx = 0.5 + rng.uniform(), sy = 0.5 + rng.uniform();
    Matrix om(2, 2);
    om << sx * sx, rho * sx * sy, rho * sx * sy, sy * sy;
    const double mi = mutual_information(build_partition(om, Vector::Zero(2), {0}, {1}));
    worst_biv = std::max(worst_biv, std::abs(mi + 0.5 * std::log1p(-rho * rho)));
  }
  const bool pass = min_mi >= 0.0 && max_indep <= 1e-10 && min_coupled > 1e-10 && worst_biv <= 1e-10;
  return {pass, "min I " + fmt(min_mi) + " over 1000 models, max I at zero coupling " + fmt(max_indep) +
                    ", min I with coupling " + fmt(min_coupled) + ", bivariate closed-form error " + fmt(worst_biv)};
}

Outcome criterion_5() {
  bool beta_ok = true;
  for (double d2 : {0.0, 0.3, 1.0, 4.0, 25.0, 1e4})
    for (Eigen::Index px = 1; px <= 12; ++px) beta_ok = beta_ok && beta_factor(DistributionKind::normal(), d2, px) == 1.0;

  RandomStream rng(2026, 5);
  double worst = 0.0;
  int cases = 0;
  for (double nu : {3.0, 4.5, 8.0, 20.0}) {
    for (Eigen::Index px : {2, 3, 4, 6}) {
      for (Eigen::Index py : {1, 2, 3}) {
        const Eigen::Index p = px + py;
        Matrix om = Matrix::Zero(p, p);
        om.topLeftCorner(px, px) = oracle::random_spd(rng, px);
        om.bottomRightCorner(py, py) = oracle::random_spd(rng, py);
        Matrix cross(px, py);
        for (Eigen::Index i = 0; i < px; ++i)
          for (Eigen::Index j = 0; j < py; ++j) cross(i, j) = 1e-6 * rng.normal();
        om.topRightCorner(px, py) = cross;
        om.bottomLeftCorner(py, px) = cross.transpose();
        IndexList ix, iy;
        for (Eigen::Index i = 0; i < px; ++i) ix.push_back(static_cast<std::size_t>(i));
        for (Eigen::Index i = 0; i < py; ++i) iy.push_back(static_cast<std::size_t>(px + i));
        const Partition part = build_partition(om, Vector::Zero(p), ix, iy);
        const Vector u = oracle::random_vector(rng, px);
        const auto kind = DistributionKind::student_t(nu);
        auto log_ratio = [&](double t) {
          return std::log(total_variance_ratio(part, condition(kind, part, t * u), VarianceReference::Shape));
        };
        double d2_root;
        if (px == 2) {
          // Threshold d2 = 0 sits at the location itself.
          d2_root = std::abs(log_ratio(0.0)) < 1e-10 ? 0.0 : INFINITY;
        } else {
          const double unit = condition(kind, part, u).d2x;
          double lo = 0.0, hi = std::sqrt(10.0 * static_cast<double>(px) / unit);
          for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (log_ratio(mid) < 0.0 ? lo : hi) = mid;
          }
          d2_root = condition(kind, part, 0.5 * (lo + hi) * u).d2x;
        }
        worst = std::max(worst, std::abs(d2_root - static_cast<double>(px - 2)));
        ++cases;
      }
    }
  }
  return {beta_ok && worst <= 1e-8, std::string("beta(Normal)=1 on grid ") + (beta_ok ? "ok" : "FAILED") + ", " +
                                        std::to_string(cases) + " weak-coupling Student-t cases, max |d2 root - (p_x-2)| " +
                                        fmt(worst) + " (<= 1e-8)"};
}

Outcome criterion_6() {
  RandomStream rng(2026, 6);
  const Matrix om = oracle::random_spd(rng, 5);
  const Vector mu = oracle::random_vector(rng, 5);
  const IndexList ix = {0, 2, 4};
  const SpdFactor fxx = validate_spd(sub_matrix(om, ix, ix));
  std::string detail;
  bool pass = true;
  for (const auto& kind : {DistributionKind::normal(), DistributionKind::student_t(8)}) {
    const Matrix draws = sample(EllipticalModel(mu, om, kind), 100000, 66);
    double s = 0, s2 = 0;
    for (Eigen::Index r = 0; r < draws.rows(); ++r) {
      const Vector x = sub_vector(draws.row(r).transpose(), ix);
      const double d2 = mahalanobis_sq(x, sub_vector(mu, ix), fxx);
      s += d2;
      s2 += d2 * d2;
    }
    const double n = static_cast<double>(draws.rows());
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    const double z = (mean - 3.0) / se;
    const bool ok = std::abs(z) < 3.0;
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + kind.name() + " mean d2 " + fmt(mean, 4) + " vs p_x=3 (" + fmt(z) + " SE) " +
              (ok ? "ok" : "off");
  }
  detail += "; Student-t shape-metric expectation is p_x nu/(nu-2) = 4";
  return {pass, detail};
}

Outcome criterion_7() {
  RandomStream rng(2026, 7);
  double min_slack = INFINITY;
  for (int t = 0; t < 1000; ++t) {
    const auto p = static_cast<std::size_t>(2 + t % 6);
    const Matrix om = oracle::random_spd(rng, static_cast<Eigen::Index>(p));
    const auto [ix, iy] = oracle::random_split(rng, p);
    const Partition part = build_partition(om, Vector::Zero(static_cast<Eigen::Index>(p)), ix, iy);
    const Vector w = oracle::random_vector(rng, part.p_y());
    const double uncond = w.dot(part.omega_yy * w);
    const double cond = portfolio_conditional_variance(part, w, DistributionKind::normal(), 0.0);
    const double direct = w.dot(conditional_covariance(condition(DistributionKind::normal(), part,
                                                                 oracle::random_vector(rng, part.p_x()))) * w);
    min_slack = std::min({min_slack, uncond - cond, uncond - direct});
  }
  return {min_slack >= -1e-10, "1000 (model, w) pairs, min slack " + fmt(min_slack) + " (>= -1e-10)"};
}

Outcome criterion_8() {
  RandomStream rng(2026, 8);
  double lo = INFINITY, hi = -INFINITY, zero_max = 0.0, scale_max = 0.0, oracle_max = 0.0;
  for (int t = 0; t < 300; ++t) {
    const auto p = static_cast<std::size_t>(3 + t % 4);
    const Matrix om = oracle::random_spd(rng, static_cast<Eigen::Index>(p));
    auto [ix, iy] = oracle::random_split(rng, p);
    if (iy.size() < 2) std::swap(ix, iy);
    const Vector mu = Vector::Zero(static_cast<Eigen::Index>(p));
    const double theta = principal_rotation(build_partition(om, mu, ix, iy));
    lo = std::min(lo, theta);
    hi = std::max(hi, theta);
    for (double s : {1e-6, 1e-2, 3.7, 1e4})
      scale_max = std::max(scale_max, std::abs(principal_rotation(build_partition(s * om, mu, ix, iy)) - theta));
    if (t < 200) oracle_max = std::max(oracle_max, std::abs(theta - oracle::BruteForce(om, mu, ix, iy).rotation()));

    Matrix block = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    const auto px = static_cast<Eigen::Index>(ix.size()), py = static_cast<Eigen::Index>(iy.size());
    block.topLeftCorner(px, px) = oracle::random_spd(rng, px);
    block.bottomRightCorner(py, py) = oracle::random_spd(rng, py);
    IndexList bx, by;
    for (Eigen::Index i = 0; i < px; ++i) bx.push_back(static_cast<std::size_t>(i));
    for (Eigen::Index i = 0; i < py; ++i) by.push_back(static_cast<std::size_t>(px + i));
    zero_max = std::max(zero_max, principal_rotation(build_partition(block, mu, bx, by)));
  }
  const bool pass = lo >= 0.0 && hi <= 90.0 && zero_max <= 1e-9 && scale_max <= 1e-9 && oracle_max <= 1e-6;
  return {pass, "range [" + fmt(lo) + ", " + fmt(hi) + "] deg, zero-coupling max " + fmt(zero_max) +
                    ", rescaling drift " + fmt(scale_max) + ", power-iteration gap " + fmt(oracle_max) + " deg"};
}

Outcome criterion_9() {
  RandomStream rng(2026, 9);
  const double q = 0.95, nu = 6.0;
  const double zq = oracle::normal_quantile(q);
  const double tq = oracle::student_t_quantile(q, nu), tq1 = oracle::student_t_quantile(q, nu + 1);
  double worst = 0.0;
  std::string worst_name;
  auto track = [&](const std::string& name, double a, double b) {
    const double e = rel_err(a, b);
    if (e > worst) {
      worst = e;
      worst_name = name;
    }
  };
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index p = 3 + t % 3;
    const bool student = t % 2 == 1;
    const auto kind = student ? DistributionKind::student_t(nu) : DistributionKind::normal();
    const Matrix om = oracle::random_spd(rng, p, 1e-4);
    const Vector mu = oracle::random_vector(rng, p, 1e-3);
    const EllipticalModel model(mu, om, kind);
    const auto [ix, iy] = oracle::random_split(rng, static_cast<std::size_t>(p));
    const StressPolicy policy = StressPolicy::parametric(q);
    const PairContext ctx(model, ix, iy, policy);
    const oracle::BruteForce bf(om, mu, ix, iy);
    const double quant = student ? tq : zq;
    Vector losses(static_cast<Eigen::Index>(ix.size()));
    for (std::size_t k = 0; k < ix.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(ix[k]);
      losses(static_cast<Eigen::Index>(k)) = -mu(i) + quant * std::sqrt(om(i, i));
    }
    const Vector x = -losses;
    const double d2 = bf.d2(x);
    const double px = static_cast<double>(ix.size());
    const double cov_scale = student ? (nu + d2) / (nu + px - 2) : 1.0;
    const double cov_factor = student ? nu / (nu - 2) : 1.0;

    track("d2", ctx.conditional().d2x, d2);
    const Vector shift = centroid_shift(ctx.partition(), x), bshift = bf.shift(x);
    for (Eigen::Index k = 0; k < shift.size(); ++k) track("shift", shift(k), bshift(k));
    track("L", ctx.evaluate(MeasureId::L), bf.average_loss(losses));
    track("MI", ctx.evaluate(MeasureId::MI), bf.mutual_information());
    track("THETA", ctx.evaluate(MeasureId::THETA), bf.rotation());
    track("DELTA", ctx.evaluate(MeasureId::DELTA), bf.shrinkage(cov_factor, cov_scale));
    track("DELTA(shape)", axis_shrinkage(ctx.partition()), bf.shrinkage());
    track("B", ctx.evaluate(MeasureId::B), d2 / px);
    track("BETA", beta_factor(kind, ctx.conditional().d2x, ctx.partition().p_x()), cov_scale);
    track("TVR", ctx.evaluate(MeasureId::TVR), bf.total_variance_ratio(cov_scale, cov_factor));
    track("TVR(shape)", total_variance_ratio(ctx.partition(), ctx.conditional(), VarianceReference::Shape),
          bf.total_variance_ratio(cov_scale, 1.0));
    const Vector w = oracle::random_vector(rng, static_cast<Eigen::Index>(iy.size()));
    track("portfolio variance", portfolio_conditional_variance(ctx.partition(), w, kind, ctx.conditional().d2x),
          bf.portfolio_variance(w, cov_scale));

    // CoVaR on the equal-weight portfolios, loss frame.
    Matrix wm = Matrix::Zero(p, 2);
    for (auto i : ix) wm(static_cast<Eigen::Index>(i), 0) = 1.0 / static_cast<double>(ix.size());
    for (auto i : iy) wm(static_cast<Eigen::Index>(i), 1) = 1.0 / static_cast<double>(iy.size());
    const Vector amu = -(wm.transpose() * mu);
    const Matrix aom = wm.transpose() * om * wm;
    const double ax = amu(0) + quant * std::sqrt(aom(0, 0));
    const double ad2 = (ax - amu(0)) * (ax - amu(0)) / aom(0, 0);
    const double amean = amu(1) + aom(1, 0) / aom(0, 0) * (ax - amu(0));
    const double abase = aom(1, 1) - aom(1, 0) * aom(1, 0) / aom(0, 0);
    const double covar = student ? amean + tq1 * std::sqrt((nu + ad2) / (nu + 1) * abase) : amean + zq * std::sqrt(abase);
    track("COVAR", ctx.evaluate(MeasureId::COVAR), covar);
  }
  return {worst <= 1e-8, "200 models (3-5 variables, both kinds), 14 quantities, worst relative error " + fmt(worst) +
                             " (" + worst_name + ", <= 1e-8)"};
}

// ---------------------------------------------------------------------------
// 10 and 11: the command-line pipeline on the bundled synthetic panel.

const fs::path kRunRoot = fs::temp_directory_path() / "ellrisk_acceptance";

int run_tool(const std::vector<std::string>& args, const fs::path& log) {
  std::string cmd = std::string("\"") + ELLRISK_EXE + "\"";
  for (const auto& a : args) cmd += " \"" + a + "\"";
  cmd += " >>\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::vector<std::string> kPinned = {
    "ingest_summary.json", "panel_groups.csv", "model.json",       "matrix_L.csv",      "matrix_L.json",
    "matrix_MI.csv",       "matrix_MI.json",   "matrix_THETA.csv", "matrix_THETA.json", "matrix_DELTA.csv",
    "matrix_DELTA.json",   "matrix_B.csv",     "matrix_B.json",    "matrix_TVR.csv",    "matrix_TVR.json",
    "matrix_COVAR.csv",    "matrix_COVAR.json", "one_vs_rest.csv", "diagnostics.json"};

bool pipeline(const fs::path& dir, std::string& why) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path log = dir / "run.log";
  const std::string cfg = (kGolden / "pipeline_config.json").string();
  for (const char* cmd : {"ingest", "fit", "matrix"}) {
    const int rc = run_tool({cmd, "--config", cfg, "--out", dir.string()}, log);
    if (rc != 0) {
      why = std::string(cmd) + " exited " + std::to_string(rc) + " (see " + log.string() + ")";
      return false;
    }
  }
  return true;
}

std::vector<std::vector<std::optional<double>>> read_matrix(const fs::path& p) {
  const json j = json::parse(io::read_file(p));
  std::vector<std::vector<std::optional<double>>> out;
  for (const auto& row : j["values"]) {
    out.emplace_back();
    for (const auto& v : row) out.back().push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  }
  return out;
}

Outcome criterion_10() {
  std::string why;
  const fs::path a = kRunRoot / "run_a", b = kRunRoot / "run_b";
  if (!pipeline(a, why) || !pipeline(b, why)) return {false, why};

  const std::string panel_hash = io::fnv1a_hex(io::read_file(a / "panel.csv"));
  if (g_bless) {
    for (const auto& f : kPinned) fs::copy_file(a / f, kGolden / f, fs::copy_options::overwrite_existing);
    io::write_file_atomic(kGolden / "panel.csv.fnv1a", panel_hash + "\n");
  }
  std::vector<std::string> mismatched;
  for (const auto& f : kPinned) {
    const std::string ref = fs::exists(kGolden / f) ? io::read_file(kGolden / f) : std::string("<missing>");
    if (io::read_file(a / f) != ref || io::read_file(b / f) != ref) mismatched.push_back(f);
  }
  if (io::read_file(a / "panel.csv") != io::read_file(b / "panel.csv") ||
      !fs::exists(kGolden / "panel.csv.fnv1a") || io::read_file(kGolden / "panel.csv.fnv1a") != panel_hash + "\n")
    mismatched.push_back("panel.csv");

  // The generator itself reproduces the bundled files.
  const fs::path synth = kRunRoot / "synth";
  fs::remove_all(synth);
  fs::create_directories(synth);
  if (run_tool({"synth", "--seed", "42", "--out", synth.string()}, synth / "run.log") != 0) return {false, "synth failed"};
  for (const char* f : {"prices.csv", "sectors.csv", "truth_model.json"})
    if (io::read_file(synth / f) != io::read_file(kData / f)) mismatched.push_back(std::string("data/synthetic/") + f);

  // Uniform stress linearity.
  const fs::path u1 = kRunRoot / "uniform_1", u2 = kRunRoot / "uniform_2";
  for (const auto& [dir, level] : {std::pair{u1, "uniform:1"}, std::pair{u2, "uniform:2"}}) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const int rc = run_tool({"matrix", "--panel", (a / "panel.csv").string(), "--model", (a / "model.json").string(),
                             "--stress-policy", level, "--measures", "L", "--out", dir.string()},
                            dir / "run.log");
    if (rc != 0) return {false, std::string("matrix with ") + level + " failed"};
  }
  const auto m1 = read_matrix(u1 / "matrix_L.json"), m2 = read_matrix(u2 / "matrix_L.json");
  double worst = 0.0;
  for (std::size_t i = 0; i < m1.size(); ++i)
    for (std::size_t j = 0; j < m1.size(); ++j)
      if (i != j) worst = std::max(worst, std::abs(*m2[i][j] - 2.0 * *m1[i][j]) / std::abs(*m1[i][j]));

  std::string detail = std::to_string(kPinned.size() + 1) + " pinned files, two runs";
  if (!mismatched.empty()) {
    detail += ", mismatched:";
    for (const auto& m : mismatched) detail += " " + m;
  } else {
    detail += " byte-identical to golden, synth seed 42 reproduces data/synthetic";
  }
  detail += "; uniform 2c/c worst relative deviation " + fmt(worst) + " (<= 1e-12)";
  return {mismatched.empty() && worst <= 1e-12, detail};
}

Outcome criterion_11() {
  const fs::path a = kRunRoot / "run_qualitative";
  std::string why;
  if (!pipeline(a, why)) return {false, why};

  const auto mi = read_matrix(a / "matrix_MI.json");
  bool symmetric = true;
  for (std::size_t i = 0; i < mi.size(); ++i)
    for (std::size_t j = 0; j < mi.size(); ++j)
      if (i != j) symmetric = symmetric && mi[i][j] && mi[j][i] && *mi[i][j] == *mi[j][i];

  const auto l = read_matrix(a / "matrix_L.json");
  double max_ratio = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i)
    for (std::size_t j = 0; j < l.size(); ++j)
      if (i != j && *l[i][j] > 0.0 && *l[j][i] > 0.0) max_ratio = std::max(max_ratio, *l[i][j] / *l[j][i]);

  const json diag = json::parse(io::read_file(a / "diagnostics.json"));
  const double fitted = diag["correlations"]["THETA_vs_MI"].get<double>();

  // Same diagnostic on the generator's true model.
  const EllipticalModel truth = io::read_model(kData / "truth_model.json").model;
  ReturnPanel labels;
  labels.tickers = truth.labels();
  labels.groups = io::read_sectors_csv(kData / "sectors.csv");
  const GroupList groups = to_group_list(group_indices(labels).groups);
  const auto mats = measure_matrices(truth, groups, {MeasureId::THETA, MeasureId::MI}, StressPolicy::uniform(1.0));
  const double true_corr = *cross_measure_correlation(mats[0], mats[1]);
  const bool sign_ok = (fitted > 0) == (true_corr > 0);

  return {symmetric && max_ratio > 1.5 && sign_ok,
          std::string("MI ") + (symmetric ? "symmetric" : "ASYMMETRIC") + ", max L(i,j)/L(j,i) " + fmt(max_ratio) +
              " (> 1.5), THETA-MI correlation fitted " + fmt(fitted) + " vs generator truth " + fmt(true_corr) +
              (sign_ok ? " (same sign)" : " (SIGN DIFFERS)")};
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)();
};

const std::vector<Criterion> kCriteria = {
    {1, "conditional law, Normal (kernel Monte Carlo)", criterion_1},
    {2, "conditional law, Student-t (kernel + direct sampling)", criterion_2},
    {3, "bivariate identities", criterion_3},
    {4, "mutual information properties", criterion_4},
    {5, "beta factor and total-variance threshold", criterion_5},
    {6, "E[d2_X] = p_X by Monte Carlo", criterion_6},
    {7, "variance reduction, Normal", criterion_7},
    {8, "rotation properties", criterion_8},
    {9, "brute-force oracle equivalence", criterion_9},
    {10, "pipeline determinism and golden files", criterion_10},
    {11, "qualitative behaviour on the synthetic panel", criterion_11},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--bless") {
      g_bless = true;
    } else {
      selected.insert(std::stoi(arg));
    }
  }
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += out.pass ? 0 : 1;
    std::printf("%s  [%2d] %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", c.id, c.title, out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
