#pragma once

// Laplace-weighted path functionals zeta(w) = int_0^inf e^{-lambda t} phi(w(t)) dt,
// their partial versions over [0, s], and enumerations of lambda x phi pairs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/error.hpp"
#include "semiflow/path_space.hpp"

namespace semiflow {

/// Bounded continuous function on the state space, used to separate points.
class SeparatingFunction {
 public:
  enum class Kind { clamped_distance, user_supplied };

  /// x -> min(|x - y|, 1).
  static SeparatingFunction clamped_distance(State y) {
    SeparatingFunction f;
    f.kind_ = Kind::clamped_distance;
    f.center_ = std::move(y);
    f.bound_ = 1.0;
    return f;
  }

  static SeparatingFunction user_supplied(std::string name, double bound,
                                          std::function<double(const State&)> fn) {
    if (!(bound > 0.0)) throw PreconditionError("separating function bound must be positive");
    SeparatingFunction f;
    f.kind_ = Kind::user_supplied;
    f.name_ = std::move(name);
    f.bound_ = bound;
    f.fn_ = std::move(fn);
    return f;
  }

  Kind kind() const noexcept { return kind_; }
  const State& center() const noexcept { return center_; }
  double bound() const noexcept { return bound_; }

  double operator()(const State& x) const {
    if (kind_ == Kind::clamped_distance) return std::min(EuclideanMetric{}(x, center_), 1.0);
    return fn_(x);
  }

  std::string describe() const {
    if (kind_ == Kind::user_supplied) return name_;
    return "clamped_distance" + detail::format_state(center_);
  }

 private:
  SeparatingFunction() = default;

  Kind kind_ = Kind::clamped_distance;
  State center_;
  std::string name_;
  double bound_ = 1.0;
  std::function<double(const State&)> fn_;
};

enum class TimeMode { continuous, discrete };

struct QuadraturePolicy {
  double quad_dt = 1e-3;
  double tail_tol = 1e-9;
  /// Discrete time replaces the integral by sum_{k>=0} e^{-lambda k} phi(w(k)).
  TimeMode mode = TimeMode::continuous;
};

/// The functional zeta for one pair (lambda, phi). The quadrature horizon is
/// chosen so that the neglected tail bound(phi) e^{-lambda T}/lambda stays
/// below the tail tolerance.
class LaplaceFunctional {
 public:
  LaplaceFunctional(double lambda, SeparatingFunction phi, QuadraturePolicy policy = {})
      : lambda_(lambda), phi_(std::move(phi)), policy_(policy) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw PreconditionError("lambda must be positive");
    if (!(policy.tail_tol > 0.0)) throw PreconditionError("tail tolerance must be positive");
    const double bound = phi_.bound();
    if (policy.mode == TimeMode::continuous) {
      if (!(policy.quad_dt > 0.0)) throw PreconditionError("quadrature step must be positive");
      const double arg = std::log(bound / (lambda * policy.tail_tol));
      double t_quad = std::max(std::ceil(arg / lambda), 1.0);
      steps_ = static_cast<std::size_t>(std::ceil(t_quad / policy.quad_dt - 1e-9));
      t_quad_ = static_cast<double>(steps_) * policy.quad_dt;
      tail_bound_ = bound * std::exp(-lambda * t_quad_) / lambda;
      auto w = std::make_shared<std::vector<double>>(steps_ + 1);
      for (std::size_t k = 0; k <= steps_; ++k) {
        (*w)[k] = std::exp(-lambda * static_cast<double>(k) * policy.quad_dt);
      }
      decay_ = std::move(w);
    } else {
      // Smallest K with bound e^{-lambda (K+1)} / (1 - e^{-lambda}) <= tail_tol.
      const double q = std::exp(-lambda);
      std::size_t k = 0;
      while (bound * std::pow(q, static_cast<double>(k + 1)) / (1.0 - q) > policy.tail_tol) ++k;
      steps_ = k;
      t_quad_ = static_cast<double>(k);
      tail_bound_ = bound * std::pow(q, static_cast<double>(k + 1)) / (1.0 - q);
      auto w = std::make_shared<std::vector<double>>(steps_ + 1);
      for (std::size_t j = 0; j <= steps_; ++j) (*w)[j] = std::exp(-lambda * static_cast<double>(j));
      decay_ = std::move(w);
    }
  }

  double lambda() const noexcept { return lambda_; }
  const SeparatingFunction& phi() const noexcept { return phi_; }
  const QuadraturePolicy& policy() const noexcept { return policy_; }
  TimeMode mode() const noexcept { return policy_.mode; }
  double t_quad() const noexcept { return t_quad_; }
  double quad_dt() const noexcept { return policy_.mode == TimeMode::continuous ? policy_.quad_dt : 1.0; }
  std::size_t steps() const noexcept { return steps_; }
  /// Upper bound on the neglected integral beyond t_quad.
  double tail_bound() const noexcept { return tail_bound_; }
  bool tail_certified() const noexcept { return tail_bound_ <= policy_.tail_tol; }
  /// e^{-lambda t_k} at the quadrature nodes.
  const std::vector<double>& decay() const noexcept { return *decay_; }

 private:
  double lambda_;
  SeparatingFunction phi_;
  QuadraturePolicy policy_;
  double t_quad_ = 0.0;
  double tail_bound_ = 0.0;
  std::size_t steps_ = 0;
  std::shared_ptr<const std::vector<double>> decay_;
};

struct ZetaValue {
  double value = 0.0;
  /// Richardson estimate of the quadrature error (zero in discrete time).
  double quad_error = 0.0;
  double tail_bound = 0.0;
};

namespace detail {

inline void require_horizon(const LaplaceFunctional& f, const Trajectory& w, double needed) {
  if (w.closed_form()) return;
  if (w.horizon() < needed * (1.0 - 1e-12)) {
    std::ostringstream os;
    os.precision(17);
    os << "trajectory horizon " << w.horizon() << " is shorter than the required " << needed
       << " for lambda = " << f.lambda();
    throw InsufficientHorizonError(os.str(), needed);
  }
}

// phi(w(t_k)) for k = 0..n at spacing h.
inline std::vector<double> integrand_samples(const LaplaceFunctional& f, const Trajectory& w,
                                             std::size_t n, double h) {
  std::vector<double> out(n + 1);
  const auto& phi = f.phi();
  State x(w.dim());
  if (const auto& cf = w.closed_form()) {
    std::vector<std::size_t> cursor(cf->dim(), 0);
    for (std::size_t k = 0; k <= n; ++k) {
      const double t = static_cast<double>(k) * h;
      for (std::size_t i = 0; i < cf->dim(); ++i) {
        const auto& pieces = cf->components[i].pieces();
        while (cursor[i] + 1 < pieces.size() && pieces[cursor[i] + 1].start <= t) ++cursor[i];
        x[i] = cf->components[i].eval_piece(cursor[i], t);
      }
      out[k] = phi(x);
    }
    return out;
  }
  for (std::size_t k = 0; k <= n; ++k) out[k] = phi(w.interpolate(static_cast<double>(k) * h));
  return out;
}

inline double trapezoid(const std::vector<double>& g, const std::vector<double>& decay,
                        std::size_t n, double h) {
  if (n == 0) return 0.0;
  double acc = 0.5 * (decay[0] * g[0] + decay[n] * g[n]);
  for (std::size_t k = 1; k < n; ++k) acc += decay[k] * g[k];
  return acc * h;
}

}  // namespace detail

/// zeta(w) by composite trapezoid on [0, t_quad] (or the truncated sum in
/// discrete time). Paths with a closed form are integrated beyond their
/// sampled horizon; sampled-only paths must cover t_quad.
inline ZetaValue zeta(const LaplaceFunctional& f, const Trajectory& w) {
  detail::require_horizon(f, w, f.t_quad());
  const std::size_t n = f.steps();
  const double h = f.quad_dt();
  const auto g = detail::integrand_samples(f, w, n, h);
  const auto& decay = f.decay();
  ZetaValue out;
  out.tail_bound = f.tail_bound();
  if (f.mode() == TimeMode::discrete) {
    for (std::size_t k = 0; k <= n; ++k) out.value += decay[k] * g[k];
    return out;
  }
  out.value = detail::trapezoid(g, decay, n, h);
  // Coarse rule on every other node, last odd panel at the fine step.
  const std::size_t even = n - (n % 2);
  double coarse = 0.0;
  if (even >= 2) {
    coarse = 0.5 * (decay[0] * g[0] + decay[even] * g[even]);
    for (std::size_t k = 2; k < even; k += 2) coarse += decay[k] * g[k];
    coarse *= 2.0 * h;
    double fine_part = 0.5 * (decay[0] * g[0] + decay[even] * g[even]);
    for (std::size_t k = 1; k < even; ++k) fine_part += decay[k] * g[k];
    fine_part *= h;
    out.quad_error = std::abs(fine_part - coarse) / 3.0;
  }
  return out;
}

/// Quadrature of the same integrand over [0, s] only (over times k < s in
/// discrete mode, so that zeta = partial + e^{-lambda s} zeta(shift)).
inline double zeta_partial(const LaplaceFunctional& f, const Trajectory& w, double s) {
  if (!(s >= 0.0) || s > f.t_quad() * (1.0 + 1e-12)) {
    throw OutOfRangeError("partial functional time outside [0, t_quad]");
  }
  const double h = f.quad_dt();
  const double ratio = s / h;
  const double kr = std::round(ratio);
  if (std::abs(ratio - kr) > detail::kAlignSlack * std::max(1.0, ratio)) {
    throw AlignmentError("partial functional time is not aligned to the quadrature step");
  }
  const auto n = static_cast<std::size_t>(kr);
  detail::require_horizon(f, w, s);
  if (n == 0) return 0.0;
  const auto& decay = f.decay();
  if (f.mode() == TimeMode::discrete) {
    const auto g = detail::integrand_samples(f, w, n - 1, h);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += decay[k] * g[k];
    return acc;
  }
  const auto g = detail::integrand_samples(f, w, n, h);
  return detail::trapezoid(g, decay, n, h);
}

/// |zeta(w) - zeta^s(w) - e^{-lambda s} zeta(theta_s w)|.
inline double cocycle_defect(const LaplaceFunctional& f, const Trajectory& w, double s) {
  const double partial = zeta_partial(f, w, s);
  const Trajectory tail = shift(w, s);
  detail::require_horizon(f, tail, f.t_quad());
  const double whole = zeta(f, w).value;
  const double shifted = zeta(f, tail).value;
  return std::abs(whole - partial - std::exp(-f.lambda() * s) * shifted);
}

/// Explicit sequence of (lambda index, phi index) pairs visiting each pair of
/// the grid at most once.
class PairOrder {
 public:
  PairOrder() = default;

  /// Anti-diagonals i + j = 0, 1, 2, ... with increasing lambda index inside
  /// each diagonal.
  static PairOrder diagonal(std::size_t n_lambda, std::size_t n_phi) {
    PairOrder o;
    o.diagonal_ = true;
    if (n_lambda == 0 || n_phi == 0) return o;
    for (std::size_t d = 0; d + 1 < n_lambda + n_phi; ++d) {
      for (std::size_t i = 0; i <= d && i < n_lambda; ++i) {
        const std::size_t j = d - i;
        if (j < n_phi) o.pairs_.emplace_back(i, j);
      }
    }
    return o;
  }

  static PairOrder explicit_order(std::vector<std::pair<std::size_t, std::size_t>> pairs,
                                  std::size_t n_lambda, std::size_t n_phi) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& p : pairs) {
      if (p.first >= n_lambda || p.second >= n_phi) {
        throw ConfigError("enumeration order refers to a pair outside the grid");
      }
      if (!seen.insert(p).second) throw ConfigError("enumeration order repeats a pair");
    }
    PairOrder o;
    o.pairs_ = std::move(pairs);
    return o;
  }

  bool is_diagonal() const noexcept { return diagonal_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const noexcept { return pairs_; }

  const std::pair<std::size_t, std::size_t>& at(std::size_t n) const {
    if (n >= pairs_.size()) throw ExhaustedEnumerationError("enumeration exhausted at index " + std::to_string(n));
    return pairs_[n];
  }

 private:
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  bool diagonal_ = false;
};

/// Finite stand-in for an enumeration of Lambda x Phi.
struct FunctionalEnumeration {
  std::vector<double> lambda_grid;
  std::vector<SeparatingFunction> phi_list;
  PairOrder order;
  QuadraturePolicy quadrature;

  std::size_t size() const noexcept { return order.size(); }
};

inline std::vector<double> default_lambda_grid() { return {0.25, 0.5, 0.75, 1.0}; }

/// Clamped distances to the points of the product grid {+-0.25, +-0.5, +-0.75, +-0.8}^d,
/// scaled by `scale`.
inline std::vector<SeparatingFunction> default_phi_family(std::size_t dim, double scale = 1.0) {
  const std::vector<double> base = {0.25, -0.25, 0.5, -0.5, 0.75, -0.75, 0.8, -0.8};
  std::vector<SeparatingFunction> out;
  std::vector<std::size_t> idx(dim, 0);
  while (true) {
    State y(dim);
    for (std::size_t i = 0; i < dim; ++i) y[i] = scale * base[idx[i]];
    out.push_back(SeparatingFunction::clamped_distance(std::move(y)));
    std::size_t pos = dim;
    while (pos > 0) {
      --pos;
      if (++idx[pos] < base.size()) break;
      idx[pos] = 0;
      if (pos == 0) return out;
    }
    if (dim == 0) return out;
  }
}

inline FunctionalEnumeration make_enumeration(std::vector<double> lambdas,
                                              std::vector<SeparatingFunction> phis,
                                              QuadraturePolicy quadrature = {}) {
  for (double l : lambdas) {
    if (!(l > 0.0)) throw ConfigError("lambda grid entries must be positive");
  }
  FunctionalEnumeration e;
  e.order = PairOrder::diagonal(lambdas.size(), phis.size());
  e.lambda_grid = std::move(lambdas);
  e.phi_list = std::move(phis);
  e.quadrature = quadrature;
  return e;
}

/// The n-th functional of the enumeration (zero-based, deterministic).
inline LaplaceFunctional enumerate(const FunctionalEnumeration& e, std::size_t n) {
  const auto& [i, j] = e.order.at(n);
  return LaplaceFunctional(e.lambda_grid.at(i), e.phi_list.at(j), e.quadrature);
}

}  // namespace semiflow
