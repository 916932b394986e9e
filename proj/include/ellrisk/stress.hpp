#pragma once

// Stress scenarios and group-level evaluation: single stressor/stressed
// pairs, full group-by-group measure matrices, and one-vs-rest vectors.

#include <algorithm>
#include <atomic>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ellrisk/estimation.hpp"
#include "ellrisk/measures.hpp"

namespace ellrisk {

enum class StressSource { EmpiricalVaR, ParametricVaR, Uniform, Explicit };

inline std::string to_string(StressSource s) {
  switch (s) {
    case StressSource::EmpiricalVaR: return "empirical-var";
    case StressSource::ParametricVaR: return "parametric-var";
    case StressSource::Uniform: return "uniform";
    case StressSource::Explicit: return "explicit";
  }
  return "unknown";
}

/// How stress vectors are produced for any stressing set. Empirical and
/// explicit policies carry one loss per model variable.
struct StressPolicy {
  StressSource source = StressSource::EmpiricalVaR;
  double q = 0.95;
  double uniform_level = 1.0;
  Vector losses;  // per-variable losses for EmpiricalVaR / Explicit
  LossForm loss_form = LossForm::Literal;

  static StressPolicy empirical(const ReturnPanel& panel, double q) {
    StressPolicy p;
    p.source = StressSource::EmpiricalVaR;
    p.q = q;
    p.losses = empirical_var_vector(panel, q);
    return p;
  }
  static StressPolicy parametric(double q) {
    require_quantile(q);
    StressPolicy p;
    p.source = StressSource::ParametricVaR;
    p.q = q;
    return p;
  }
  static StressPolicy uniform(double level, double q = 0.95) {
    StressPolicy p;
    p.source = StressSource::Uniform;
    p.uniform_level = level;
    p.q = q;
    return p;
  }
  static StressPolicy explicit_losses(Vector losses, double q = 0.95) {
    StressPolicy p;
    p.source = StressSource::Explicit;
    p.losses = std::move(losses);
    p.q = q;
    return p;
  }
};

/// A resolved stress on a particular stressing set.
struct StressScenario {
  Vector losses;  // positive loss magnitudes
  Vector x;       // return-space stress point, -losses
  double q = 0.95;
  StressSource source = StressSource::EmpiricalVaR;
};

/// Parametric loss VaR of one variable: the q-quantile of loss = -return.
inline double parametric_loss_var(const EllipticalModel& model, std::size_t i, double q) {
  const auto k = static_cast<Eigen::Index>(i);
  return var_univariate(-model.mu()(k), std::sqrt(model.omega()(k, k)), model.kind(), q);
}

inline StressScenario resolve_scenario(const StressPolicy& policy, const EllipticalModel& model,
                                       const IndexList& idx_x) {
  StressScenario s;
  s.q = policy.q;
  s.source = policy.source;
  s.losses.resize(static_cast<Eigen::Index>(idx_x.size()));
  for (std::size_t k = 0; k < idx_x.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    if (idx_x[k] >= static_cast<std::size_t>(model.dim()))
      throw Error(ErrorCode::IndexOutOfRange, "stress index out of range");
    switch (policy.source) {
      case StressSource::EmpiricalVaR:
      case StressSource::Explicit:
        if (policy.losses.size() != model.dim())
          throw Error(ErrorCode::DimensionMismatch, "stress policy losses do not cover every variable");
        s.losses(row) = policy.losses(static_cast<Eigen::Index>(idx_x[k]));
        break;
      case StressSource::ParametricVaR:
        s.losses(row) = parametric_loss_var(model, idx_x[k], policy.q);
        break;
      case StressSource::Uniform:
        s.losses(row) = policy.uniform_level;
        break;
    }
  }
  s.x = -s.losses;
  return s;
}

enum class MeasureId { L, MI, THETA, DELTA, B, TVR, COVAR };

inline const std::vector<MeasureId>& all_measures() {
  static const std::vector<MeasureId> ids = {MeasureId::L,     MeasureId::MI, MeasureId::THETA,
                                             MeasureId::DELTA, MeasureId::B,  MeasureId::TVR,
                                             MeasureId::COVAR};
  return ids;
}

inline std::string to_string(MeasureId id) {
  switch (id) {
    case MeasureId::L: return "L";
    case MeasureId::MI: return "MI";
    case MeasureId::THETA: return "THETA";
    case MeasureId::DELTA: return "DELTA";
    case MeasureId::B: return "B";
    case MeasureId::TVR: return "TVR";
    case MeasureId::COVAR: return "COVAR";
  }
  return "?";
}

inline MeasureId parse_measure(const std::string& name) {
  for (auto id : all_measures())
    if (to_string(id) == name) return id;
  throw Error(ErrorCode::InvalidParameters, "unknown measure '" + name + "'");
}

/// Two-variable loss-frame model of the equal-weight portfolios of X and Y.
inline EllipticalModel aggregate_pair(const EllipticalModel& model, const IndexList& idx_x,
                                      const IndexList& idx_y) {
  auto weights = [&](const IndexList& idx) {
    Vector w = Vector::Zero(model.dim());
    for (auto i : idx) w(static_cast<Eigen::Index>(i)) = 1.0 / static_cast<double>(idx.size());
    return w;
  };
  Matrix w(model.dim(), 2);
  w.col(0) = weights(idx_x);
  w.col(1) = weights(idx_y);
  Vector mu = -(w.transpose() * model.mu());
  Matrix omega = w.transpose() * model.omega() * w;
  return EllipticalModel(std::move(mu), symmetrized(omega), model.kind(), {"X", "Y"});
}

/// Everything needed to evaluate any measure for one (X, Y) pair.
class PairContext {
 public:
  PairContext(const EllipticalModel& model, const IndexList& idx_x, const IndexList& idx_y,
              const StressPolicy& policy)
      : model_(model),
        policy_(policy),
        part_(build_partition(model, idx_x, idx_y)),
        scenario_(resolve_scenario(policy, model, idx_x)),
        cond_(condition(model, part_, scenario_.x)) {}

  const Partition& partition() const { return part_; }
  const StressScenario& scenario() const { return scenario_; }
  const ConditionalModel& conditional() const { return cond_; }

  double evaluate(MeasureId id) const {
    switch (id) {
      case MeasureId::L: return average_loss(part_, scenario_.losses, policy_.loss_form);
      case MeasureId::MI: return mutual_information(part_);
      case MeasureId::THETA: return principal_rotation(part_);
      case MeasureId::DELTA: return axis_shrinkage(part_, cond_);
      case MeasureId::B: return mahalanobis_impact_factor(part_, scenario_.x);
      case MeasureId::TVR: return total_variance_ratio(part_, cond_);
      case MeasureId::COVAR:
        return covar_univariate(aggregate_pair(model_, part_.idx_x, part_.idx_y), policy_.q, policy_.q);
    }
    throw Error(ErrorCode::InvalidParameters, "unknown measure");
  }

 private:
  const EllipticalModel& model_;
  const StressPolicy& policy_;
  Partition part_;
  StressScenario scenario_;
  ConditionalModel cond_;
};

/// All single-pair quantities for one stressor set and one stressed set.
/// Measures that fail are reported in `errors` without discarding the rest.
struct StressReport {
  StressScenario scenario;
  double d2x = 0.0;
  Vector shift;
  std::map<std::string, double> values;  // L, MI, THETA, DELTA, BETA, B, TVR
  std::map<std::string, std::string> errors;
};

inline StressReport stress_pair(const EllipticalModel& model, const IndexList& idx_x,
                                const IndexList& idx_y, const StressPolicy& policy) {
  const PairContext ctx(model, idx_x, idx_y, policy);
  StressReport report;
  report.scenario = ctx.scenario();
  report.d2x = ctx.conditional().d2x;
  report.shift = centroid_shift(ctx.partition(), ctx.scenario().x);
  auto record = [&](const std::string& name, auto&& fn) {
    try {
      report.values[name] = fn();
    } catch (const Error& e) {
      report.errors[name] = e.what();
    }
  };
  for (auto id : {MeasureId::L, MeasureId::MI, MeasureId::THETA, MeasureId::DELTA, MeasureId::B,
                  MeasureId::TVR}) {
    record(to_string(id), [&] { return ctx.evaluate(id); });
  }
  record("BETA", [&] {
    return beta_factor(model.kind(), ctx.conditional().d2x, ctx.partition().p_x());
  });
  return report;
}

/// g x g matrix of one measure; rows are stressor groups, columns stressed groups.
struct MeasureMatrix {
  std::string measure_name;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::optional<double>> values;  // row-major, diagonal empty
  std::map<std::pair<std::size_t, std::size_t>, std::string> cell_errors;

  std::size_t size() const { return row_labels.size(); }
  const std::optional<double>& at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
  std::optional<double>& at(std::size_t i, std::size_t j) { return values[i * size() + j]; }
};

using GroupList = std::vector<std::pair<std::string, IndexList>>;

inline GroupList to_group_list(const std::map<std::string, IndexList>& groups) {
  return GroupList(groups.begin(), groups.end());
}

namespace detail {

inline void require_groups(const GroupList& groups) {
  if (groups.size() < 2) throw Error(ErrorCode::InvalidParameters, "need at least two groups");
  std::vector<std::size_t> all;
  for (const auto& [name, idx] : groups) {
    if (idx.empty()) throw Error(ErrorCode::EmptySet, "group '" + name + "' is empty");
    all.insert(all.end(), idx.begin(), idx.end());
  }
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    throw Error(ErrorCode::OverlappingSets, "groups are not disjoint");
}

/// Runs task(k) for k in [0, count) on a bounded pool.
template <typename Task>
void parallel_for(std::size_t count, unsigned threads, Task&& task) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) task(k);
    });
}

}  // namespace detail

/// One matrix per requested measure. Mutual information is computed once per
/// unordered pair and mirrored. Cell failures are recorded, not thrown.
inline std::vector<MeasureMatrix> measure_matrices(const EllipticalModel& model, const GroupList& groups,
                                                   const std::vector<MeasureId>& measures,
                                                   const StressPolicy& policy, unsigned threads = 1) {
  detail::require_groups(groups);
  if (measures.empty()) throw Error(ErrorCode::InvalidParameters, "no measures requested");
  const std::size_t g = groups.size();
  std::vector<MeasureMatrix> out(measures.size());
  for (std::size_t m = 0; m < measures.size(); ++m) {
    out[m].measure_name = to_string(measures[m]);
    for (const auto& grp : groups) {
      out[m].row_labels.push_back(grp.first);
      out[m].col_labels.push_back(grp.first);
    }
    out[m].values.assign(g * g, std::nullopt);
  }
  // Errors land in per-cell slots so workers never share a container.
  std::vector<std::vector<std::string>> errors(g * g, std::vector<std::string>(measures.size()));

  detail::parallel_for(g * g, threads, [&](std::size_t cell) {
    const std::size_t i = cell / g;
    const std::size_t j = cell % g;
    if (i == j) return;
    std::optional<PairContext> ctx;
    std::string ctx_error;
    try {
      ctx.emplace(model, groups[i].second, groups[j].second, policy);
    } catch (const Error& e) {
      ctx_error = e.what();
    }
    for (std::size_t m = 0; m < measures.size(); ++m) {
      if (measures[m] == MeasureId::MI && i > j) continue;
      if (!ctx) {
        errors[cell][m] = ctx_error;
        continue;
      }
      try {
        out[m].values[cell] = ctx->evaluate(measures[m]);
      } catch (const Error& e) {
        errors[cell][m] = e.what();
      }
    }
  });

  for (std::size_t m = 0; m < measures.size(); ++m) {
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t j = 0; j < g; ++j) {
        if (i == j) continue;
        const bool mirrored = measures[m] == MeasureId::MI && i > j;
        const std::size_t src = mirrored ? j * g + i : i * g + j;
        if (mirrored) out[m].at(i, j) = out[m].values[src];
        if (!errors[src][m].empty()) out[m].cell_errors[{i, j}] = errors[src][m];
      }
    }
  }
  return out;
}

inline MeasureMatrix measure_matrix(const EllipticalModel& model, const GroupList& groups, MeasureId measure,
                                    const StressPolicy& policy, unsigned threads = 1) {
  return std::move(measure_matrices(model, groups, {measure}, policy, threads).front());
}

/// Per group: the measure with the group stressing the rest of the system,
/// and with the rest stressing the group.
struct OneVsRest {
  std::vector<std::string> groups;
  std::vector<MeasureId> measures;
  std::vector<std::vector<std::optional<double>>> group_to_rest;  // [group][measure]
  std::vector<std::vector<std::optional<double>>> rest_to_group;
  std::vector<std::string> errors;
};

inline OneVsRest one_vs_rest(const EllipticalModel& model, const GroupList& groups,
                             const std::vector<MeasureId>& measures, const StressPolicy& policy,
                             unsigned threads = 1) {
  detail::require_groups(groups);
  const std::size_t g = groups.size();
  OneVsRest out;
  out.measures = measures;
  out.group_to_rest.assign(g, std::vector<std::optional<double>>(measures.size()));
  out.rest_to_group.assign(g, std::vector<std::optional<double>>(measures.size()));
  std::vector<std::vector<std::string>> errors(2 * g);
  for (const auto& grp : groups) out.groups.push_back(grp.first);

  detail::parallel_for(2 * g, threads, [&](std::size_t task) {
    const std::size_t k = task / 2;
    const bool outward = task % 2 == 0;
    IndexList rest;
    for (std::size_t other = 0; other < g; ++other)
      if (other != k) rest.insert(rest.end(), groups[other].second.begin(), groups[other].second.end());
    std::sort(rest.begin(), rest.end());
    const IndexList& own = groups[k].second;
    auto& row = outward ? out.group_to_rest[k] : out.rest_to_group[k];
    const std::string label = outward ? groups[k].first + "->rest" : "rest->" + groups[k].first;
    try {
      const PairContext ctx(model, outward ? own : rest, outward ? rest : own, policy);
      for (std::size_t m = 0; m < measures.size(); ++m) {
        try {
          row[m] = ctx.evaluate(measures[m]);
        } catch (const Error& e) {
          errors[task].push_back(label + " " + to_string(measures[m]) + ": " + e.what());
        }
      }
    } catch (const Error& e) {
      errors[task].push_back(label + ": " + e.what());
    }
  });
  for (const auto& list : errors) out.errors.insert(out.errors.end(), list.begin(), list.end());
  return out;
}

/// Pearson correlation over off-diagonal cells where both matrices have values.
inline std::optional<double> cross_measure_correlation(const MeasureMatrix& a, const MeasureMatrix& b) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if (i != j && a.at(i, j) && b.at(i, j)) {
        xs.push_back(*a.at(i, j));
        ys.push_back(*b.at(i, j));
      }
  if (xs.size() < 3) return std::nullopt;
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace ellrisk
