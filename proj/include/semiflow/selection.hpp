#pragma once

// Semiflow selection by iterated maximization: S^0 = S, S^{n+1} = V_{zeta_{n+1}}[S^n],
// stopped once the survivors collapse to one path, and a checker for
// u(t2, u(t1, x)) = u(t1 + t2, x).

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/error.hpp"
#include "semiflow/functionals.hpp"
#include "semiflow/funnel.hpp"
#include "semiflow/path_space.hpp"

namespace semiflow {

struct SelectionOptions {
  /// Absolute slack for keeping near-maximizers.
  double eps = 1e-9;
  /// Survivor diameter (path metric) at which the reduction stops.
  double singleton_tol = 1e-9;
  std::size_t n_max = 16;
};

struct ReductionStep {
  std::size_t functional_index = 0;
  double lambda = 0.0;
  std::string phi;
  std::vector<std::size_t> survivors;
  double max_value = 0.0;
  /// max - min of zeta among the survivors.
  double spread = 0.0;
};

struct ReductionTrace {
  std::vector<ReductionStep> steps;
  /// False when several distinct paths survived n_max steps and the
  /// smallest index was taken.
  bool singleton = true;
  std::size_t chosen = 0;
};

struct Reduction {
  Trajectory path;
  std::string label;
  ReductionTrace trace;
};

/// Indices (into `candidates`) whose zeta is within eps of the maximum.
inline std::vector<std::size_t> maximizer_indices(const Funnel& funnel, const std::vector<std::size_t>& candidates,
                                                  const LaplaceFunctional& f, double eps, double* max_value = nullptr,
                                                  double* spread = nullptr) {
  if (candidates.empty()) throw PreconditionError("maximizer set of an empty funnel");
  if (!(eps >= 0.0)) throw PreconditionError("eps must be non-negative");
  std::vector<double> values;
  values.reserve(candidates.size());
  for (std::size_t i : candidates) values.push_back(zeta(f, funnel.members.at(i)).value);
  const double best = *std::max_element(values.begin(), values.end());
  std::vector<std::size_t> keep;
  double lowest = best;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (values[k] >= best - eps) {
      keep.push_back(candidates[k]);
      lowest = std::min(lowest, values[k]);
    }
  }
  if (max_value) *max_value = best;
  if (spread) *spread = best - lowest;
  return keep;
}

/// V_zeta[S(x)]: the members attaining max zeta up to eps, in funnel order.
inline Funnel maximizer_set(const Funnel& funnel, const LaplaceFunctional& f, double eps = 1e-9) {
  std::vector<std::size_t> all(funnel.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto keep = maximizer_indices(funnel, all, f, eps);
  Funnel out;
  out.initial = funnel.initial;
  for (std::size_t i : keep) {
    out.members.push_back(funnel.members[i]);
    if (i < funnel.labels.size()) out.labels.push_back(funnel.labels[i]);
  }
  return out;
}

/// Largest pairwise path distance among the indexed members.
inline double survivor_diameter(const Funnel& funnel, const std::vector<std::size_t>& idx) {
  double d = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      d = std::max(d, path_distance(funnel.members[idx[a]], funnel.members[idx[b]]));
    }
  }
  return d;
}

inline Reduction reduce(const Funnel& funnel, const FunctionalEnumeration& e, const SelectionOptions& opts = {}) {
  if (funnel.members.empty()) throw PreconditionError("cannot reduce an empty funnel");
  if (opts.n_max > e.size()) {
    throw PreconditionError("n_max " + std::to_string(opts.n_max) + " exceeds the enumeration length " +
                            std::to_string(e.size()));
  }
  std::vector<std::size_t> survivors(funnel.size());
  for (std::size_t i = 0; i < survivors.size(); ++i) survivors[i] = i;
  ReductionTrace trace;
  bool collapsed = survivors.size() == 1;
  for (std::size_t n = 0; n < opts.n_max && !collapsed; ++n) {
    const LaplaceFunctional f = enumerate(e, n);
    ReductionStep step;
    step.functional_index = n;
    step.lambda = f.lambda();
    step.phi = f.phi().describe();
    survivors = maximizer_indices(funnel, survivors, f, opts.eps, &step.max_value, &step.spread);
    step.survivors = survivors;
    trace.steps.push_back(std::move(step));
    collapsed = survivors.size() == 1 || survivor_diameter(funnel, survivors) <= opts.singleton_tol;
  }
  trace.singleton = collapsed;
  trace.chosen = survivors.front();
  return {funnel.members[trace.chosen], funnel.label(trace.chosen), std::move(trace)};
}

struct SelectedPath {
  State initial;
  Trajectory path;
  std::string label;
  ReductionTrace trace;
};

/// The selection x -> u(., x) on a finite set of initial conditions, with
/// the configuration used to compute it.
struct SemiflowSelection {
  std::vector<SelectedPath> entries;
  FunctionalEnumeration enumeration;
  SelectionOptions options;

  const SelectedPath* find(const State& x) const {
    for (const auto& e : entries) {
      if (e.initial == x) return &e;
    }
    return nullptr;
  }
};

inline SemiflowSelection select_semiflow(const FunnelSystem& sys, const std::vector<State>& initials,
                                         const FunctionalEnumeration& e, const SelectionOptions& opts = {}) {
  SemiflowSelection sel{{}, e, opts};
  sel.entries.reserve(initials.size());
  for (const auto& x : initials) {
    const Funnel f = sys(x);
    f.validate();
    auto r = reduce(f, e, opts);
    sel.entries.push_back({x, std::move(r.path), std::move(r.label), std::move(r.trace)});
  }
  return sel;
}

struct SemigroupReport {
  bool pass = true;
  double max_defect = 0.0;
  std::size_t checked = 0;
  /// Worst case: x, t1, t2 and the two sides of the identity.
  State witness_x;
  double witness_t1 = 0.0;
  double witness_t2 = 0.0;
  State witness_lhs;
  State witness_rhs;
};

/// Checks rho(u(t2, u(t1, x)), u(t1 + t2, x)) <= tol for every selected x.
/// Intermediate states u(t1, x) are reduced afresh with the selection's own
/// configuration.
inline SemigroupReport verify_semigroup(const SemiflowSelection& sel, const FunnelSystem& sys,
                                        const std::vector<double>& t1_grid, const std::vector<double>& t2_grid,
                                        double tol) {
  std::map<State, Reduction> cache;
  auto selected_at = [&](const State& y) -> const Trajectory& {
    if (const auto* hit = sel.find(y)) return hit->path;
    auto it = cache.find(y);
    if (it == cache.end()) {
      if (!sys.in_domain(y)) {
        throw DomainError("intermediate state " + detail::format_state(y) + " outside the generator domain");
      }
      const Funnel f = sys(y);
      f.validate();
      it = cache.emplace(y, reduce(f, sel.enumeration, sel.options)).first;
    }
    return it->second.path;
  };

  SemigroupReport report;
  for (const auto& entry : sel.entries) {
    for (double t1 : t1_grid) {
      for (double t2 : t2_grid) {
        sys.grid.steps_for(t1);
        sys.grid.steps_for(t2);
        if (t1 + t2 > entry.path.horizon() * (1.0 + 1e-12)) {
          throw PreconditionError("t1 + t2 exceeds the horizon");
        }
        const State y = evaluate(entry.path, t1);
        const Trajectory& from_y = selected_at(y);
        const State lhs = evaluate(from_y, t2);
        const State rhs = evaluate(entry.path, t1 + t2);
        const double defect = EuclideanMetric{}(lhs, rhs);
        if (report.checked++ == 0 || defect > report.max_defect) {
          report.max_defect = defect;
          report.witness_x = entry.initial;
          report.witness_t1 = t1;
          report.witness_t2 = t2;
          report.witness_lhs = lhs;
          report.witness_rhs = rhs;
        }
        if (defect > tol) report.pass = false;
      }
    }
  }
  return report;
}

}  // namespace semiflow
