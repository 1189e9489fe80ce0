#pragma once

// Paths on a uniform time grid: evaluation, the shift semigroup, splicing and
// the compact-open path metric truncated to finitely many levels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/error.hpp"

namespace semiflow {

using State = std::vector<double>;

inline constexpr double kDefaultSpliceTol = 1e-9;
inline constexpr double kRepresentationTol = 1e-9;

namespace detail {

inline std::string format_state(const State& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

// Relative slack used when deciding whether a duration sits on the grid.
inline constexpr double kAlignSlack = 1e-9;

}  // namespace detail

/// Euclidean distance on R^d.
struct EuclideanMetric {
  double operator()(std::span<const double> a, std::span<const double> b) const {
    if (a.size() != b.size()) throw PreconditionError("state dimension mismatch");
    if (a.size() == 1) return std::abs(a[0] - b[0]);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
  }
};

/// Uniform grid {k*dt : k = 0..count-1}. The horizon is derived from dt and
/// count so that horizon == dt*(count-1) holds exactly.
class TimeGrid {
 public:
  TimeGrid(double dt, std::size_t count) : dt_(dt), count_(count) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("time grid needs dt > 0");
    if (count < 2) throw PreconditionError("time grid needs at least two samples");
  }

  static TimeGrid from_horizon(double dt, double horizon) {
    if (!(dt > 0.0)) throw PreconditionError("time grid needs dt > 0");
    if (!(horizon > 0.0)) throw PreconditionError("time grid needs a positive horizon");
    const double ratio = horizon / dt;
    const double k = std::round(ratio);
    if (std::abs(ratio - k) > detail::kAlignSlack * std::max(1.0, ratio)) {
      throw AlignmentError("horizon is not a multiple of dt");
    }
    return TimeGrid(dt, static_cast<std::size_t>(k) + 1);
  }

  double dt() const noexcept { return dt_; }
  std::size_t count() const noexcept { return count_; }
  double horizon() const noexcept { return dt_ * static_cast<double>(count_ - 1); }
  double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt_; }

  /// Number of steps k with s == k*dt; throws when s is not grid-aligned.
  std::size_t steps_for(double s) const {
    if (!(s >= 0.0)) throw OutOfRangeError("negative duration");
    const double ratio = s / dt_;
    const double k = std::round(ratio);
    if (std::abs(ratio - k) > detail::kAlignSlack * std::max(1.0, ratio)) {
      std::ostringstream os;
      os.precision(17);
      os << "duration " << s << " is not aligned to grid step " << dt_;
      throw AlignmentError(os.str());
    }
    return static_cast<std::size_t>(k);
  }

  bool aligned(double s) const {
    if (!(s >= 0.0)) return false;
    const double ratio = s / dt_;
    return std::abs(ratio - std::round(ratio)) <= detail::kAlignSlack * std::max(1.0, ratio);
  }

  bool same_step(const TimeGrid& other) const noexcept {
    return std::abs(dt_ - other.dt_) <= 1e-12 * std::max(dt_, other.dt_);
  }

  TimeGrid with_count(std::size_t count) const { return TimeGrid(dt_, count); }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double dt_;
  std::size_t count_;
};

/// Polynomial piece p(t) = sum_j coeffs[j] * (t - start)^j, valid from start
/// until the next piece begins.
struct PolynomialPiece {
  double start = 0.0;
  std::vector<double> coeffs;

  friend bool operator==(const PolynomialPiece&, const PolynomialPiece&) = default;
};

/// Scalar piecewise polynomial on [0, inf). Pieces are sorted by start and the
/// first piece starts at 0; the last piece extends to infinity.
class PiecewisePolynomial {
 public:
  PiecewisePolynomial() : pieces_{PolynomialPiece{0.0, {0.0}}} {}
  explicit PiecewisePolynomial(std::vector<PolynomialPiece> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw PreconditionError("piecewise polynomial needs a piece");
    if (pieces_.front().start != 0.0) throw PreconditionError("first piece must start at 0");
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      if (pieces_[i].coeffs.empty()) pieces_[i].coeffs = {0.0};
      if (i > 0 && !(pieces_[i].start > pieces_[i - 1].start)) {
        throw PreconditionError("piece starts must be strictly increasing");
      }
    }
  }

  static PiecewisePolynomial constant(double a) {
    return PiecewisePolynomial(std::vector<PolynomialPiece>{PolynomialPiece{0.0, {a}}});
  }

  const std::vector<PolynomialPiece>& pieces() const noexcept { return pieces_; }

  double operator()(double t) const { return eval_piece(locate(t), t); }

  /// Index of the piece active at time t.
  std::size_t locate(double t) const {
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                               [](double v, const PolynomialPiece& p) { return v < p.start; });
    return it == pieces_.begin() ? 0 : static_cast<std::size_t>(it - pieces_.begin()) - 1;
  }

  double eval_piece(std::size_t i, double t) const {
    const auto& p = pieces_[i];
    const double u = t - p.start;
    double acc = 0.0;
    for (std::size_t j = p.coeffs.size(); j-- > 0;) acc = acc * u + p.coeffs[j];
    return acc;
  }

  /// t -> f(t + s).
  PiecewisePolynomial shifted(double s) const {
    const std::size_t first = locate(s);
    std::vector<PolynomialPiece> out;
    out.reserve(pieces_.size() - first);
    out.push_back({0.0, taylor_shift(pieces_[first].coeffs, s - pieces_[first].start)});
    for (std::size_t i = first + 1; i < pieces_.size(); ++i) {
      out.push_back({pieces_[i].start - s, pieces_[i].coeffs});
    }
    return PiecewisePolynomial(std::move(out));
  }

  /// f on [0, s), then t -> tail(t - s).
  PiecewisePolynomial spliced(double s, const PiecewisePolynomial& tail) const {
    std::vector<PolynomialPiece> out;
    for (const auto& p : pieces_) {
      if (p.start < s) out.push_back(p);
    }
    for (const auto& p : tail.pieces_) {
      out.push_back({p.start + s, p.coeffs});
    }
    return PiecewisePolynomial(std::move(out));
  }

  friend bool operator==(const PiecewisePolynomial&, const PiecewisePolynomial&) = default;

 private:
  // Coefficients of q(u) = p(u + d).
  static std::vector<double> taylor_shift(const std::vector<double>& c, double d) {
    std::vector<double> out(c);
    if (d == 0.0) return out;
    const std::size_t n = out.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = n - 1; j > i; --j) out[j - 1] += d * out[j];
    }
    return out;
  }

  std::vector<PolynomialPiece> pieces_;
};

/// Exact analytic form of a path, one piecewise polynomial per coordinate.
struct ClosedForm {
  std::vector<PiecewisePolynomial> components;

  std::size_t dim() const noexcept { return components.size(); }

  State operator()(double t) const {
    State x(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) x[i] = components[i](t);
    return x;
  }

  ClosedForm shifted(double s) const {
    ClosedForm out;
    for (const auto& c : components) out.components.push_back(c.shifted(s));
    return out;
  }

  ClosedForm spliced(double s, const ClosedForm& tail) const {
    if (tail.dim() != dim()) throw PreconditionError("closed form dimension mismatch");
    ClosedForm out;
    for (std::size_t i = 0; i < dim(); ++i) {
      out.components.push_back(components[i].spliced(s, tail.components[i]));
    }
    return out;
  }

  friend bool operator==(const ClosedForm&, const ClosedForm&) = default;
};

/// A path sampled on a TimeGrid, optionally carrying its exact closed form.
class Trajectory {
 public:
  Trajectory(TimeGrid grid, std::vector<State> values, std::optional<ClosedForm> closed_form = {})
      : grid_(grid), values_(std::move(values)), closed_form_(std::move(closed_form)) {
    if (values_.size() != grid_.count()) {
      throw PreconditionError("trajectory length does not match its grid");
    }
    const std::size_t d = values_.front().size();
    if (d == 0) throw PreconditionError("trajectory states must have positive dimension");
    for (const auto& x : values_) {
      if (x.size() != d) throw PreconditionError("trajectory states have mixed dimensions");
      for (double v : x) {
        if (!std::isfinite(v)) throw PreconditionError("trajectory contains a non-finite state");
      }
    }
    if (closed_form_ && closed_form_->dim() != d) {
      throw PreconditionError("closed form dimension does not match samples");
    }
  }

  /// Samples a closed form on the grid and keeps it attached.
  static Trajectory from_closed_form(TimeGrid grid, ClosedForm cf) {
    std::vector<State> values;
    values.reserve(grid.count());
    for (std::size_t k = 0; k < grid.count(); ++k) values.push_back(cf(grid.time(k)));
    return Trajectory(grid, std::move(values), std::move(cf));
  }

  static Trajectory constant(TimeGrid grid, const State& a) {
    ClosedForm cf;
    for (double v : a) cf.components.push_back(PiecewisePolynomial::constant(v));
    return from_closed_form(grid, std::move(cf));
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  const std::vector<State>& values() const noexcept { return values_; }
  const State& operator[](std::size_t k) const { return values_.at(k); }
  const std::optional<ClosedForm>& closed_form() const noexcept { return closed_form_; }
  std::size_t dim() const noexcept { return values_.front().size(); }
  double horizon() const noexcept { return grid_.horizon(); }

  /// Largest deviation between the samples and the attached closed form.
  double representation_error() const {
    if (!closed_form_) return 0.0;
    double worst = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const State x = (*closed_form_)(grid_.time(k));
      worst = std::max(worst, EuclideanMetric{}(x, values_[k]));
    }
    return worst;
  }

  /// Value at t >= 0. With a closed form any t is admissible; otherwise t is
  /// clamped to the sampled horizon by the caller's contract.
  State value_at(double t) const {
    if (closed_form_) return (*closed_form_)(t);
    return interpolate(t);
  }

  State interpolate(double t) const {
    const double pos = t / grid_.dt();
    if (pos <= 0.0) return values_.front();
    const auto k = static_cast<std::size_t>(std::floor(pos));
    if (k + 1 >= values_.size()) return values_.back();
    const double frac = pos - static_cast<double>(k);
    if (frac == 0.0) return values_[k];
    State x(dim());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = (1.0 - frac) * values_[k][i] + frac * values_[k + 1][i];
    }
    return x;
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  TimeGrid grid_;
  std::vector<State> values_;
  std::optional<ClosedForm> closed_form_;
};

/// Point evaluation w(t) for t in [0, horizon]. Uses the closed form when one
/// is attached, linear interpolation between samples otherwise.
inline State evaluate(const Trajectory& w, double t) {
  const double h = w.horizon();
  if (!(t >= 0.0) || t > h * (1.0 + 1e-12) + 1e-15) {
    std::ostringstream os;
    os.precision(17);
    os << "evaluation time " << t << " outside [0, " << h << "]";
    throw OutOfRangeError(os.str());
  }
  return w.value_at(std::min(t, h));
}

/// Shift theta_s: t -> w(t + s) on the shortened horizon.
inline Trajectory shift(const Trajectory& w, double s) {
  if (s > w.horizon() * (1.0 + 1e-12)) throw OutOfRangeError("shift beyond the horizon");
  const std::size_t k = w.grid().steps_for(s);
  if (k == 0) return w;
  if (k + 2 > w.grid().count()) {
    throw OutOfRangeError("shift leaves fewer than two samples on the grid");
  }
  std::vector<State> values(w.values().begin() + static_cast<std::ptrdiff_t>(k), w.values().end());
  std::optional<ClosedForm> cf;
  if (w.closed_form()) cf = w.closed_form()->shifted(w.grid().time(k));
  const TimeGrid grid = w.grid().with_count(values.size());
  return Trajectory(grid, std::move(values), std::move(cf));
}

enum class SpliceHorizon {
  /// Result horizon is min(s + v.horizon, w.horizon).
  keep_outer,
  /// Result horizon is s + v.horizon.
  extend,
};

struct SpliceOptions {
  double tol = kDefaultSpliceTol;
  SpliceHorizon horizon = SpliceHorizon::keep_outer;
};

/// Splicing: w on [0, s], then v(t - s). The sample at s keeps w's value.
template <class Metric = EuclideanMetric>
Trajectory splice(const Trajectory& w, double s, const Trajectory& v, SpliceOptions opts = {},
                  Metric rho = {}) {
  if (!w.grid().same_step(v.grid())) throw GridMismatchError("splice of paths on different grids");
  if (s > w.horizon() * (1.0 + 1e-12)) throw OutOfRangeError("splice time beyond the horizon");
  const std::size_t k = w.grid().steps_for(s);
  const double gap = rho(w[k], v[0]);
  if (gap > opts.tol) {
    std::ostringstream os;
    os.precision(17);
    os << "splice endpoint mismatch " << gap << " exceeds tolerance " << opts.tol;
    throw SpliceMismatchError(os.str(), gap);
  }
  std::size_t count = k + v.grid().count();
  if (opts.horizon == SpliceHorizon::keep_outer) count = std::min(count, w.grid().count());
  std::vector<State> values;
  values.reserve(count);
  for (std::size_t j = 0; j < count; ++j) values.push_back(j <= k ? w[j] : v[j - k]);
  std::optional<ClosedForm> cf;
  if (w.closed_form() && v.closed_form()) {
    cf = w.closed_form()->spliced(w.grid().time(k), *v.closed_form());
  }
  return Trajectory(w.grid().with_count(count), std::move(values), std::move(cf));
}

namespace detail {

// Truncated path metric where level l uses grid points in [0, min(l, H)].
template <class Metric>
double truncated_metric(const Trajectory& u, const Trajectory& v, std::size_t levels, Metric rho) {
  const std::size_t n = std::min(u.grid().count(), v.grid().count());
  const double dt = u.grid().dt();
  double result = 0.0;
  double running = 0.0;
  std::size_t k = 0;
  double weight = 0.5;
  for (std::size_t level = 1; level <= levels; ++level, weight *= 0.5) {
    const double edge = static_cast<double>(level) * (1.0 + 1e-12);
    for (; k < n && static_cast<double>(k) * dt <= edge; ++k) running = std::max(running, rho(u[k], v[k]));
    result += weight * running / (1.0 + running);
  }
  return result;
}

}  // namespace detail

/// sum_{l=1}^{levels} 2^-l m_l / (1 + m_l), m_l the largest grid distance on
/// [0, l]. The neglected tail of the infinite series is at most 2^-levels.
template <class Metric = EuclideanMetric>
double path_metric(const Trajectory& u, const Trajectory& v, std::size_t levels, Metric rho = {}) {
  if (!u.grid().same_step(v.grid())) throw GridMismatchError("path metric on different grids");
  const double h = std::min(u.horizon(), v.horizon());
  if (levels < 1 || static_cast<double>(levels) > h * (1.0 + 1e-12)) {
    throw PreconditionError("path metric levels must lie in [1, horizon]");
  }
  return detail::truncated_metric(u, v, levels, rho);
}

/// Number of metric levels available on the common horizon of two paths.
inline std::size_t metric_levels(const Trajectory& u, const Trajectory& v) {
  const double h = std::min(u.horizon(), v.horizon());
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(h * (1.0 + 1e-12))));
}

/// Metric with as many levels as the common horizon allows; paths shorter than
/// one time unit compare on their whole horizon.
template <class Metric = EuclideanMetric>
double path_distance(const Trajectory& u, const Trajectory& v, Metric rho = {}) {
  if (!u.grid().same_step(v.grid())) throw GridMismatchError("path metric on different grids");
  return detail::truncated_metric(u, v, metric_levels(u, v), rho);
}

}  // namespace semiflow
