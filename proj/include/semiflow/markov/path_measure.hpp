#pragma once

// Probability measures on the finite path space {0..m-1}^{N+1}: shift
// push-forward, conditioning on a prefix, splicing P (x)_s Q and the
// discrete Laplace functionals.
//
// Paths are indexed in base m with w(0) as the most significant digit, so
// the prefix of length s+1 is idx / m^{N-s} and the tail theta_s w is
// idx % m^{N-s+1}.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/error.hpp"

namespace semiflow::markov {

inline constexpr std::size_t kDefaultPathCap = 4096;

class FinitePathSpace {
 public:
  /// Horizon 0 is admitted for the one-point tails produced by shifting to N.
  FinitePathSpace(int m, int horizon, std::size_t cap = kDefaultPathCap) : m_(m), horizon_(horizon) {
    if (m < 2) throw PreconditionError("path space needs at least two states");
    if (horizon < 0) throw PreconditionError("path space horizon must be non-negative");
    std::size_t n = 1;
    for (int t = 0; t <= horizon; ++t) {
      n *= static_cast<std::size_t>(m);
      if (n > cap) {
        throw ResourceError("path space " + std::to_string(m) + "^" + std::to_string(horizon + 1) +
                            " exceeds the cap of " + std::to_string(cap) + " paths");
      }
    }
    size_ = n;
  }

  int m() const noexcept { return m_; }
  int horizon() const noexcept { return horizon_; }
  std::size_t size() const noexcept { return size_; }

  /// m^k.
  std::size_t power(int k) const noexcept {
    std::size_t p = 1;
    for (int i = 0; i < k; ++i) p *= static_cast<std::size_t>(m_);
    return p;
  }

  int state_at(std::size_t path, int t) const noexcept {
    return static_cast<int>((path / power(horizon_ - t)) % static_cast<std::size_t>(m_));
  }

  std::size_t prefix_of(std::size_t path, int s) const noexcept { return path / power(horizon_ - s); }
  std::size_t tail_of(std::size_t path, int s) const noexcept { return path % power(horizon_ - s + 1); }

  /// Last state of a prefix of length s+1, given as a prefix index.
  int prefix_end(std::size_t prefix) const noexcept { return static_cast<int>(prefix % static_cast<std::size_t>(m_)); }

  std::vector<int> decode(std::size_t path) const {
    std::vector<int> w(static_cast<std::size_t>(horizon_) + 1);
    for (int t = horizon_; t >= 0; --t) {
      w[static_cast<std::size_t>(t)] = static_cast<int>(path % static_cast<std::size_t>(m_));
      path /= static_cast<std::size_t>(m_);
    }
    return w;
  }

  std::size_t encode(const std::vector<int>& w) const {
    std::size_t idx = 0;
    for (int x : w) {
      if (x < 0 || x >= m_) throw OutOfRangeError("state outside the path space");
      idx = idx * static_cast<std::size_t>(m_) + static_cast<std::size_t>(x);
    }
    return idx;
  }

  /// Space of tails after shifting by s.
  FinitePathSpace shifted(int s) const {
    if (s < 0 || s > horizon_) throw OutOfRangeError("shift outside [0, N]");
    return FinitePathSpace(m_, horizon_ - s, size_);
  }

  friend bool operator==(const FinitePathSpace& a, const FinitePathSpace& b) {
    return a.m_ == b.m_ && a.horizon_ == b.horizon_;
  }

 private:
  int m_;
  int horizon_;
  std::size_t size_ = 0;
};

template <class T = double>
struct PathMeasure {
  FinitePathSpace space;
  std::vector<T> probs;

  PathMeasure(FinitePathSpace sp, std::vector<T> p) : space(sp), probs(std::move(p)) {
    if (probs.size() != space.size()) throw PreconditionError("measure length does not match the path space");
  }

  explicit PathMeasure(FinitePathSpace sp) : space(sp), probs(sp.size(), T(0)) {}

  static PathMeasure delta(FinitePathSpace sp, std::size_t path) {
    PathMeasure P(sp);
    P.probs.at(path) = T(1);
    return P;
  }

  T mass() const {
    T acc(0);
    for (const auto& p : probs) acc += p;
    return acc;
  }

  /// Probability of the cylinder fixed by each prefix of length s+1.
  std::vector<T> prefix_masses(int s) const {
    std::vector<T> out(space.power(s + 1), T(0));
    for (std::size_t w = 0; w < probs.size(); ++w) out[space.prefix_of(w, s)] += probs[w];
    return out;
  }

  /// Law of w(t).
  std::vector<T> marginal(int t) const {
    std::vector<T> out(static_cast<std::size_t>(space.m()), T(0));
    for (std::size_t w = 0; w < probs.size(); ++w) out[static_cast<std::size_t>(space.state_at(w, t))] += probs[w];
    return out;
  }

  friend bool operator==(const PathMeasure&, const PathMeasure&) = default;
};

/// Throws unless entries are non-negative and sum to one within tol.
inline void validate(const PathMeasure<double>& P, double tol = 1e-12) {
  double acc = 0.0;
  for (double p : P.probs) {
    if (!(p >= 0.0)) throw PreconditionError("measure has a negative entry");
    acc += p;
  }
  if (std::abs(acc - 1.0) > tol) throw PreconditionError("measure does not sum to one");
}

/// Push-forward theta_s P on the tail space of horizon N - s.
template <class T>
PathMeasure<T> shift_measure(const PathMeasure<T>& P, int s) {
  PathMeasure<T> out(P.space.shifted(s));
  for (std::size_t w = 0; w < P.probs.size(); ++w) out.probs[P.space.tail_of(w, s)] += P.probs[w];
  return out;
}

/// P[theta_s^{-1}(.) | F_s] on the cylinder of `prefix` (length s + 1).
template <class T>
PathMeasure<T> conditional(const PathMeasure<T>& P, int s, std::size_t prefix) {
  PathMeasure<T> out(P.space.shifted(s));
  T mass(0);
  for (std::size_t w = 0; w < P.probs.size(); ++w) {
    if (P.space.prefix_of(w, s) == prefix) mass += P.probs[w];
  }
  if (!(mass > T(0))) {
    throw UndefinedConditionalError("conditioning on prefix " + std::to_string(prefix) + " of probability zero");
  }
  for (std::size_t w = 0; w < P.probs.size(); ++w) {
    if (P.space.prefix_of(w, s) == prefix) out.probs[P.space.tail_of(w, s)] += P.probs[w] / mass;
  }
  return out;
}

template <class T>
PathMeasure<T> conditional(const PathMeasure<T>& P, int s, const std::vector<int>& prefix) {
  if (static_cast<int>(prefix.size()) != s + 1) throw PreconditionError("prefix length must be s + 1");
  FinitePathSpace pre(P.space.m(), s, P.space.size());
  return conditional(P, s, pre.encode(prefix));
}

/// A measurable selection w -> Q_w indexed by the prefix of w up to time s.
/// Prefixes without an entry may only occur with probability zero.
template <class T = double>
struct MarkovKernelSelection {
  int s = 0;
  std::map<std::size_t, PathMeasure<T>> kernels;

  const PathMeasure<T>* find(std::size_t prefix) const {
    auto it = kernels.find(prefix);
    return it == kernels.end() ? nullptr : &it->second;
  }
};

/// Kernel made of P's own conditionals on every positive-probability prefix.
template <class T>
MarkovKernelSelection<T> conditional_kernels(const PathMeasure<T>& P, int s) {
  MarkovKernelSelection<T> Q;
  Q.s = s;
  const auto masses = P.prefix_masses(s);
  for (std::size_t p = 0; p < masses.size(); ++p) {
    if (masses[p] > T(0)) Q.kernels.emplace(p, conditional(P, s, p));
  }
  return Q;
}

/// P (x)_s Q: agrees with P on F_s and has conditional tail law Q_w at time s.
template <class T>
PathMeasure<T> splice_measures(const PathMeasure<T>& P, int s, const MarkovKernelSelection<T>& Q) {
  if (Q.s != s) throw PreconditionError("kernel selection was built for another splice time");
  const auto masses = P.prefix_masses(s);
  const FinitePathSpace tails = P.space.shifted(s);
  const std::size_t tail_block = tails.power(tails.horizon());
  for (std::size_t p = 0; p < masses.size(); ++p) {
    if (!(masses[p] > T(0))) continue;
    const auto* q = Q.find(p);
    if (!q) throw PreconditionError("kernel missing for a prefix of positive probability");
    if (!(q->space == tails)) throw PreconditionError("kernel lives on the wrong tail space");
    const auto start = static_cast<std::size_t>(P.space.prefix_end(p));
    for (std::size_t v = 0; v < q->probs.size(); ++v) {
      if (v / tail_block != start && q->probs[v] != T(0)) {
        throw PreconditionError("kernel for prefix " + std::to_string(p) + " is not supported on paths from its endpoint");
      }
    }
  }
  PathMeasure<T> out(P.space);
  for (std::size_t w = 0; w < P.probs.size(); ++w) {
    const std::size_t p = P.space.prefix_of(w, s);
    if (!(masses[p] > T(0))) continue;
    out.probs[w] = masses[p] * Q.find(p)->probs[P.space.tail_of(w, s)];
  }
  return out;
}

/// Coefficients eta_w = sum_{t=t_begin}^{t_end-1} e^{-lambda t} phi(w(t)), so that
/// the functional is P -> sum_w eta_w P(w).
inline std::vector<double> laplace_coefficients(const FinitePathSpace& space, double lambda,
                                                const std::vector<double>& phi, int t_begin, int t_end) {
  if (static_cast<int>(phi.size()) != space.m()) throw PreconditionError("phi must be defined on every state");
  std::vector<double> eta(space.size(), 0.0);
  for (std::size_t w = 0; w < eta.size(); ++w) {
    double acc = 0.0;
    for (int t = t_begin; t < t_end; ++t) {
      acc += std::exp(-lambda * t) * phi[static_cast<std::size_t>(space.state_at(w, t))];
    }
    eta[w] = acc;
  }
  return eta;
}

template <class T>
T apply(const std::vector<double>& eta, const PathMeasure<T>& P) {
  if (eta.size() != P.probs.size()) throw PreconditionError("functional and measure sizes differ");
  T acc(0);
  for (std::size_t w = 0; w < eta.size(); ++w) acc += T(eta[w]) * P.probs[w];
  return acc;
}

/// zeta(P) = sum_{t=0}^{N} e^{-lambda t} E_P[phi(w(t))].
template <class T>
T zeta_measure(const PathMeasure<T>& P, double lambda, const std::vector<double>& phi) {
  return markov::apply(laplace_coefficients(P.space, lambda, phi, 0, P.space.horizon() + 1), P);
}

/// zeta^s(P): the same sum over times t < s.
template <class T>
T zeta_partial_measure(const PathMeasure<T>& P, double lambda, const std::vector<double>& phi, int s) {
  return markov::apply(laplace_coefficients(P.space, lambda, phi, 0, s), P);
}

}  // namespace semiflow::markov
