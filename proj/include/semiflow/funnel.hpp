#pragma once

// Finite integral funnels: the Heaviside and sign-sqrt solution families,
// Euler-branching funnels of differential inclusions, and closure checks
// for the shift (S3) and splicing (S4) properties.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "semiflow/error.hpp"
#include "semiflow/path_space.hpp"

namespace semiflow {

inline constexpr double kInfiniteDelay = std::numeric_limits<double>::infinity();

struct Funnel {
  State initial;
  std::vector<Trajectory> members;
  std::vector<std::string> labels;

  std::size_t size() const noexcept { return members.size(); }
  const TimeGrid& grid() const { return members.front().grid(); }

  /// Throws unless the funnel is non-empty, shares one grid and every member
  /// starts at the initial state within tol.
  void validate(double tol = kDefaultSpliceTol) const {
    if (members.empty()) throw PreconditionError("funnel has no members");
    if (!labels.empty() && labels.size() != members.size()) {
      throw PreconditionError("funnel labels do not match members");
    }
    for (const auto& w : members) {
      if (!(w.grid() == members.front().grid())) throw GridMismatchError("funnel members on different grids");
      if (EuclideanMetric{}(w[0], initial) > tol) {
        throw PreconditionError("funnel member does not start at " + detail::format_state(initial));
      }
    }
  }

  std::string label(std::size_t i) const { return i < labels.size() ? labels[i] : std::to_string(i); }
};

/// A deterministic state -> funnel map on a fixed grid.
struct FunnelSystem {
  std::function<Funnel(const State&)> generator;
  TimeGrid grid;
  double closure_tol = 1e-9;
  /// Optional domain predicate; an empty function means the whole space.
  std::function<bool(const State&)> domain;
  std::string name;

  bool in_domain(const State& x) const { return !domain || domain(x); }

  Funnel operator()(const State& x) const {
    if (!in_domain(x)) throw DomainError("state " + detail::format_state(x) + " outside the domain of " + name);
    return generator(x);
  }
};

/// Delays {k*step : k*step <= horizon} plus the infinite delay.
inline std::vector<double> default_c_grid(const TimeGrid& grid, double step = 0.0) {
  if (step == 0.0) step = grid.dt();
  const std::size_t stride = grid.steps_for(step);
  if (stride == 0) throw PreconditionError("delay grid step must be positive");
  std::vector<double> out;
  for (std::size_t k = 0; k < grid.count(); k += stride) out.push_back(grid.time(k));
  out.push_back(kInfiniteDelay);
  return out;
}

namespace detail {

inline void check_delays(const TimeGrid& grid, const std::vector<double>& c_grid) {
  for (double c : c_grid) {
    if (std::isinf(c) && c > 0) continue;
    grid.steps_for(c);
  }
}

// Label with the shortest round-trip representation of c.
inline std::string delay_label(const std::string& prefix, double c) {
  if (std::isinf(c)) return prefix + "_inf";
  std::ostringstream os;
  os.precision(15);
  os << prefix << '_' << c;
  return os.str();
}

// Exact grid time for an aligned delay so that onsets coincide with samples.
inline double snap(const TimeGrid& grid, double c) { return grid.time(grid.steps_for(c)); }

}  // namespace detail

/// Solutions of du/dt = H(u), H = 1 on (0, inf) and 0 elsewhere:
/// a > 0 gives a + t, a < 0 gives a, and a = 0 gives the delayed ramps
/// v_c(t) = max(t - c, 0) for every c in c_grid (v_inf == 0).
inline Funnel heaviside_funnel(double a, const TimeGrid& grid, const std::vector<double>& c_grid) {
  detail::check_delays(grid, c_grid);
  Funnel f;
  f.initial = {a};
  if (a > 0.0) {
    f.members.push_back(Trajectory::from_closed_form(grid, {{PiecewisePolynomial({{0.0, {a, 1.0}}})}}));
    f.labels.push_back("ramp");
    return f;
  }
  if (a < 0.0) {
    f.members.push_back(Trajectory::constant(grid, {a}));
    f.labels.push_back("rest");
    return f;
  }
  bool has_rest = false;
  for (double c : c_grid) {
    if (std::isinf(c)) {
      has_rest = true;
      continue;
    }
    const double onset = detail::snap(grid, c);
    std::vector<PolynomialPiece> pieces;
    if (onset > 0.0) pieces.push_back({0.0, {0.0}});
    pieces.push_back({onset, {0.0, 1.0}});
    f.members.push_back(Trajectory::from_closed_form(grid, {{PiecewisePolynomial(std::move(pieces))}}));
    f.labels.push_back(detail::delay_label("v", onset));
  }
  if (has_rest) {
    f.members.push_back(Trajectory::constant(grid, {0.0}));
    f.labels.push_back("v_inf");
  }
  if (f.members.empty()) throw PreconditionError("empty delay grid for the Heaviside funnel at 0");
  return f;
}

enum class Branch { up, down, stay };

/// Solutions of du/dt = 2 sign(u) sqrt|u|. Away from zero the forward
/// solution is unique, u(t) = sign(a) (t + sqrt|a|)^2. At zero each
/// requested branch contributes +-(t - c)^2 after a delay c; `stay` (or an
/// infinite delay) contributes the rest path.
inline Funnel signsqrt_funnel(double a, const TimeGrid& grid, const std::vector<double>& c_grid,
                              const std::vector<Branch>& branches) {
  detail::check_delays(grid, c_grid);
  Funnel f;
  f.initial = {a};
  if (a != 0.0) {
    const double r = std::sqrt(std::abs(a));
    const double sg = a > 0.0 ? 1.0 : -1.0;
    f.members.push_back(Trajectory::from_closed_form(
        grid, {{PiecewisePolynomial({{0.0, {a, sg * 2.0 * r, sg}}})}}));
    f.labels.push_back(a > 0.0 ? "escape_up" : "escape_down");
    return f;
  }
  bool want_rest = false;
  auto wants = [&](Branch b) { return std::find(branches.begin(), branches.end(), b) != branches.end(); };
  for (Branch b : {Branch::up, Branch::down}) {
    if (!wants(b)) continue;
    const double sg = b == Branch::up ? 1.0 : -1.0;
    for (double c : c_grid) {
      if (std::isinf(c)) {
        want_rest = true;
        continue;
      }
      const double onset = detail::snap(grid, c);
      std::vector<PolynomialPiece> pieces;
      if (onset > 0.0) pieces.push_back({0.0, {0.0}});
      pieces.push_back({onset, {0.0, 0.0, sg}});
      f.members.push_back(Trajectory::from_closed_form(grid, {{PiecewisePolynomial(std::move(pieces))}}));
      f.labels.push_back(detail::delay_label(b == Branch::up ? "up" : "down", onset));
    }
  }
  if (wants(Branch::stay)) want_rest = true;
  if (want_rest) {
    f.members.push_back(Trajectory::constant(grid, {0.0}));
    f.labels.push_back("stay");
  }
  if (f.members.empty()) throw PreconditionError("empty sign-sqrt funnel at 0");
  return f;
}

inline FunnelSystem heaviside_system(const TimeGrid& grid, std::vector<double> c_grid,
                                     double closure_tol = 1e-9) {
  detail::check_delays(grid, c_grid);
  FunnelSystem sys{[grid, c_grid](const State& x) { return heaviside_funnel(x.at(0), grid, c_grid); },
                   grid, closure_tol, [](const State& x) { return x.size() == 1; }, "heaviside"};
  return sys;
}

inline FunnelSystem signsqrt_system(const TimeGrid& grid, std::vector<double> c_grid,
                                    std::vector<Branch> branches, double closure_tol = 1e-9) {
  detail::check_delays(grid, c_grid);
  FunnelSystem sys{[grid, c_grid, branches](const State& x) {
                     return signsqrt_funnel(x.at(0), grid, c_grid, branches);
                   },
                   grid, closure_tol, [](const State& x) { return x.size() == 1; }, "signsqrt"};
  return sys;
}

/// Set-valued right-hand side du/dt in F(u) with growth bound |v| <= psi(|u|).
struct InclusionRHS {
  std::function<std::vector<State>(const State&)> velocities;
  /// Nondecreasing and positive.
  std::function<double(double)> growth;
  std::string name;

  std::vector<State> operator()(const State& u) const {
    auto vs = velocities(u);
    if (vs.empty()) throw DomainError("inclusion has no velocity at " + detail::format_state(u));
    const double bound = growth(norm(u));
    for (const auto& v : vs) {
      if (v.size() != u.size()) throw PreconditionError("velocity dimension mismatch");
      if (norm(v) > bound * (1.0 + 1e-12)) {
        throw DomainError("velocity violates the growth bound at " + detail::format_state(u));
      }
    }
    return vs;
  }

  static double norm(const State& x) { return EuclideanMetric{}(x, State(x.size(), 0.0)); }
};

/// Single-valued inclusion F(u) = {f(u)}.
inline InclusionRHS single_valued(std::function<State(const State&)> f, std::function<double(double)> growth,
                                  std::string name = "ode") {
  return {[f = std::move(f)](const State& u) { return std::vector<State>{f(u)}; }, std::move(growth),
          std::move(name)};
}

/// Filippov convexification of du/dt = H(u) restricted to its extreme
/// velocities: {1} above zero, {0} below, {0, 1} at zero.
inline InclusionRHS heaviside_inclusion() {
  return {[](const State& u) {
            if (u.at(0) > 0.0) return std::vector<State>{{1.0}};
            if (u.at(0) < 0.0) return std::vector<State>{{0.0}};
            return std::vector<State>{{0.0}, {1.0}};
          },
          [](double) { return 1.0; }, "heaviside_filippov"};
}

/// F(u) = {-1, +1}.
inline InclusionRHS sign_pair_inclusion() {
  return {[](const State&) { return std::vector<State>{{-1.0}, {1.0}}; }, [](double) { return 1.0; },
          "sign_pair"};
}

struct InclusionOptions {
  std::size_t max_branches = 64;
  double prune_tol = 1e-9;
  /// Largest population allowed before pruning in a single step.
  std::size_t hard_cap = 1u << 20;
};

/// A funnel member produced by Euler branching together with the velocity
/// chosen at every step.
struct InclusionBranch {
  std::vector<State> states;
  std::vector<State> controls;
};

namespace detail {

inline double partial_distance(const InclusionBranch& a, const InclusionBranch& b, double dt) {
  const std::size_t n = a.states.size();
  const double h = dt * static_cast<double>(n - 1);
  const std::size_t levels = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(h - 1e-12)));
  double result = 0.0, running = 0.0, weight = 0.5;
  std::size_t k = 0;
  for (std::size_t level = 1; level <= levels; ++level, weight *= 0.5) {
    const double edge = static_cast<double>(level) * (1.0 + 1e-12);
    for (; k < n && static_cast<double>(k) * dt <= edge; ++k) {
      running = std::max(running, EuclideanMetric{}(a.states[k], b.states[k]));
    }
    result += weight * running / (1.0 + running);
  }
  return result;
}

// Keep-first eps-separated subset.
inline std::vector<std::size_t> separated_subset(const std::vector<InclusionBranch>& pop, double eps, double dt) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    bool far = true;
    for (std::size_t j : kept) {
      if (partial_distance(pop[i], pop[j], dt) < eps) {
        far = false;
        break;
      }
    }
    if (far) kept.push_back(i);
  }
  return kept;
}

}  // namespace detail

/// Euler-branching tree for du/dt in F(u), returned with each member's
/// velocity sequence. Branches closer than prune_tol are merged (the earlier
/// one is kept); if the population still exceeds max_branches, the
/// separation radius doubles until a keep-first separated subset fits.
inline std::vector<InclusionBranch> inclusion_branches(const InclusionRHS& F, const State& x,
                                                       const TimeGrid& grid, InclusionOptions opts = {}) {
  if (opts.max_branches < 1) throw PreconditionError("max_branches must be at least 1");
  const double dt = grid.dt();
  std::vector<InclusionBranch> pop{{{x}, {}}};
  for (std::size_t step = 1; step < grid.count(); ++step) {
    std::vector<InclusionBranch> next;
    for (const auto& b : pop) {
      const auto vs = F(b.states.back());
      if (next.size() + vs.size() > opts.hard_cap) {
        std::ostringstream os;
        os << "inclusion branching reached " << next.size() + vs.size() << " paths at step " << step
           << " (hard cap " << opts.hard_cap << ")";
        throw ResourceError(os.str());
      }
      for (const auto& v : vs) {
        InclusionBranch child = b;
        State u = b.states.back();
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += dt * v[i];
        child.states.push_back(std::move(u));
        child.controls.push_back(v);
        next.push_back(std::move(child));
      }
    }
    double eps = opts.prune_tol;
    auto kept = detail::separated_subset(next, eps, dt);
    while (kept.size() > opts.max_branches) {
      eps = eps > 0.0 ? 2.0 * eps : 1e-12;
      kept = detail::separated_subset(next, eps, dt);
    }
    std::vector<InclusionBranch> survivors;
    survivors.reserve(kept.size());
    for (std::size_t i : kept) survivors.push_back(std::move(next[i]));
    pop = std::move(survivors);
  }
  return pop;
}

inline Funnel inclusion_funnel(const InclusionRHS& F, const State& x, const TimeGrid& grid,
                               InclusionOptions opts = {}) {
  auto branches = inclusion_branches(F, x, grid, opts);
  Funnel f;
  f.initial = x;
  for (std::size_t i = 0; i < branches.size(); ++i) {
    f.members.emplace_back(grid, std::move(branches[i].states));
    f.labels.push_back("branch_" + std::to_string(i));
  }
  return f;
}

inline FunnelSystem inclusion_system(InclusionRHS F, const TimeGrid& grid, InclusionOptions opts = {},
                                     double closure_tol = 1e-9) {
  std::string name = F.name;
  return FunnelSystem{[F = std::move(F), grid, opts](const State& x) { return inclusion_funnel(F, x, grid, opts); },
                      grid, closure_tol, {}, std::move(name)};
}

/// Discrete growth envelope: Psi_{k+1} = Psi_k + dt psi(Psi_k), Psi_0 = |x|.
inline std::vector<double> growth_envelope(const InclusionRHS& F, const State& x, const TimeGrid& grid) {
  std::vector<double> psi(grid.count());
  psi[0] = InclusionRHS::norm(x);
  for (std::size_t k = 1; k < grid.count(); ++k) psi[k] = psi[k - 1] + grid.dt() * F.growth(psi[k - 1]);
  return psi;
}

struct ClosureReport {
  bool pass = true;
  double max_defect = 0.0;
  std::size_t checked = 0;
  std::string witness;
};

namespace detail {

inline void record(ClosureReport& r, double defect, double tol, const std::string& witness) {
  if (r.checked++ == 0 || defect > r.max_defect) {
    r.max_defect = defect;
    r.witness = witness;
  }
  if (defect > tol) r.pass = false;
}

/// Grid samples of a path without building a Trajectory: stored values, or a
/// closed form evaluated at k*dt.
struct SampleView {
  const Trajectory* stored = nullptr;
  const ClosedForm* form = nullptr;
  double dt = 0.0;
  std::size_t count = 0;
  std::size_t dim = 0;

  double operator()(std::size_t k, std::size_t i) const {
    return form ? form->components[i](static_cast<double>(k) * dt) : (*stored)[k][i];
  }
};

inline SampleView view_of(const Trajectory& w) { return {&w, nullptr, w.grid().dt(), w.grid().count(), w.dim()}; }

/// Same value as path_distance on the materialized paths.
inline double view_distance(const SampleView& a, const SampleView& b) {
  const std::size_t n = std::min(a.count, b.count);
  const double h = a.dt * static_cast<double>(n - 1);
  const std::size_t levels = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(h * (1.0 + 1e-12))));
  double result = 0.0, running = 0.0, weight = 0.5;
  std::size_t k = 0;
  for (std::size_t level = 1; level <= levels; ++level, weight *= 0.5) {
    const double edge = static_cast<double>(level) * (1.0 + 1e-12);
    for (; k < n && static_cast<double>(k) * a.dt <= edge; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < a.dim; ++i) {
        const double d = a(k, i) - b(k, i);
        acc += d * d;
      }
      running = std::max(running, std::sqrt(acc));
    }
    result += weight * running / (1.0 + running);
  }
  return result;
}

/// Members bucketed by a hash of (at most 64 strided) samples rounded to a
/// 1e-7 lattice. Exact matches are found by lookup; anything else falls back
/// to a scan.
class MemberIndex {
 public:
  explicit MemberIndex(const Funnel& f) : funnel_(&f) {
    for (std::size_t i = 0; i < f.size(); ++i) buckets_[key(view_of(f.members[i]))].push_back(i);
  }

  double nearest(const SampleView& target, double tol) const {
    double best = std::numeric_limits<double>::infinity();
    const auto it = buckets_.find(key(target));
    if (it != buckets_.end()) {
      for (std::size_t i : it->second) {
        best = std::min(best, view_distance(target, view_of(funnel_->members[i])));
        if (best <= tol) return best;
      }
    }
    for (const auto& v : funnel_->members) {
      best = std::min(best, view_distance(target, view_of(v)));
      if (best <= tol) break;
    }
    return best;
  }

  double nearest(const Trajectory& target, double tol) const { return nearest(view_of(target), tol); }

 private:
  static std::size_t key(const SampleView& w) {
    std::size_t h = w.count;
    const std::size_t stride = std::max<std::size_t>(1, w.count / 64);
    for (std::size_t k = 0; k < w.count; k += stride) {
      for (std::size_t i = 0; i < w.dim; ++i) {
        const auto q = static_cast<long long>(std::llround(w(k, i) * 1e7));
        h ^= std::hash<long long>{}(q) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      }
    }
    return h;
  }

  const Funnel* funnel_;
  std::unordered_map<std::size_t, std::vector<std::size_t>> buckets_;
};

inline double nearest(const Trajectory& target, const Funnel& candidates, double tol) {
  return MemberIndex(candidates).nearest(target, tol);
}

/// sys(y), generated once per distinct y.
class FunnelCache {
 public:
  explicit FunnelCache(const FunnelSystem& sys) : sys_(&sys) {}

  const Funnel& operator()(const State& y) {
    auto it = cache_.find(y);
    if (it == cache_.end()) it = cache_.emplace(y, (*sys_)(y)).first;
    return it->second;
  }

 private:
  const FunnelSystem* sys_;
  std::map<State, Funnel> cache_;
};

}  // namespace detail

/// Discrete S3: every shifted member theta_s w lies within closure_tol of
/// some member of sys(w(s)).
inline ClosureReport check_S3(const FunnelSystem& sys, const State& x, const std::vector<double>& sample_s) {
  ClosureReport report;
  const Funnel fx = sys(x);
  detail::FunnelCache funnels(sys);
  for (double s : sample_s) {
    sys.grid.steps_for(s);
    for (std::size_t i = 0; i < fx.size(); ++i) {
      const auto& w = fx.members[i];
      const Trajectory tail = shift(w, s);
      const double defect = detail::nearest(tail, funnels(evaluate(w, s)), sys.closure_tol);
      std::ostringstream os;
      os.precision(17);
      os << "member " << fx.label(i) << ", s = " << s;
      detail::record(report, defect, sys.closure_tol, os.str());
    }
  }
  return report;
}

/// Discrete S4: every splice w |><|_s v with v in sys(w(s)) lies within
/// closure_tol of some member of sys(x).
inline ClosureReport check_S4(const FunnelSystem& sys, const State& x, const std::vector<double>& sample_s) {
  ClosureReport report;
  const Funnel fx = sys(x);
  const detail::MemberIndex index(fx);
  detail::FunnelCache funnels(sys);
  for (double s : sample_s) {
    const std::size_t k = sys.grid.steps_for(s);
    for (std::size_t i = 0; i < fx.size(); ++i) {
      const auto& w = fx.members[i];
      const Funnel& fy = funnels(evaluate(w, s));
      for (std::size_t j = 0; j < fy.size(); ++j) {
        const auto& v = fy.members[j];
        double defect = 0.0;
        if (w.closed_form() && v.closed_form() && k < w.grid().count()) {
          // Splice the closed forms; samples are evaluated on demand.
          const double gap = EuclideanMetric{}(w[k], v[0]);
          if (gap > kDefaultSpliceTol) {
            std::ostringstream os;
            os.precision(17);
            os << "splice endpoint mismatch " << gap << " exceeds tolerance " << kDefaultSpliceTol;
            throw SpliceMismatchError(os.str(), gap);
          }
          const ClosedForm joined = w.closed_form()->spliced(w.grid().time(k), *v.closed_form());
          const std::size_t count = std::min(k + v.grid().count(), w.grid().count());
          defect = index.nearest(detail::SampleView{nullptr, &joined, w.grid().dt(), count, w.dim()}, sys.closure_tol);
        } else {
          defect = index.nearest(splice(w, s, v), sys.closure_tol);
        }
        std::ostringstream os;
        os.precision(17);
        os << "member " << fx.label(i) << " spliced at s = " << s << " with " << fy.label(j);
        detail::record(report, defect, sys.closure_tol, os.str());
      }
    }
  }
  return report;
}

}  // namespace semiflow
