#pragma once

// Markov selection by iterated maximization C^{n+1} = V_{zeta_{n+1}}[C^n] over
// every horizon and state, plus the checks on the selected family: the
// Markov identity, its conditional form, Chapman-Kolmogorov, and the two
// Krylov properties of the underlying map.
//
// The family is indexed by horizon: P^{(h)}_x is the selection in C_h(x).
// The tail of P^{(N)}_x after s steps is compared with P^{(N-s)}_{w(s)}.
// Comparing with the first N-s steps of P^{(N)}_{w(s)} instead is reported
// as truncation_defect; it is not a pass criterion because finite-horizon
// maximizers depend on the remaining horizon.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/error.hpp"
#include "semiflow/functionals.hpp"
#include "semiflow/markov/krylov.hpp"
#include "semiflow/markov/path_measure.hpp"
#include "semiflow/markov/polytope.hpp"
#include "semiflow/markov/strassen.hpp"

namespace semiflow::markov {

/// (lambda, phi) pairs with phi a function on the states.
struct MarkovEnumeration {
  std::vector<double> lambda_grid;
  std::vector<std::vector<double>> phi_list;
  PairOrder order;

  std::size_t size() const noexcept { return order.size(); }
  double lambda(std::size_t n) const { return lambda_grid.at(order.at(n).first); }
  const std::vector<double>& phi(std::size_t n) const { return phi_list.at(order.at(n).second); }
};

/// Singleton indicators 1{state == y} crossed with the lambda grid.
inline MarkovEnumeration indicator_enumeration(int m, std::vector<double> lambdas = default_lambda_grid()) {
  for (double l : lambdas) {
    if (!(l > 0.0)) throw ConfigError("lambda grid entries must be positive");
  }
  MarkovEnumeration e;
  for (int y = 0; y < m; ++y) {
    std::vector<double> phi(static_cast<std::size_t>(m), 0.0);
    phi[static_cast<std::size_t>(y)] = 1.0;
    e.phi_list.push_back(std::move(phi));
  }
  e.order = PairOrder::diagonal(lambdas.size(), e.phi_list.size());
  e.lambda_grid = std::move(lambdas);
  return e;
}

struct MarkovSelectOptions {
  /// 0 runs the whole enumeration.
  std::size_t n_max = 0;
  double face_tol = kDefaultFaceTol;
  double singleton_tol = 1e-12;
};

template <class T = double>
struct MarkovSelection {
  /// Reduced faces [h][x].
  PolytopeFamily<T> faces;
  /// Selected measures [h][x]: the first vertex of each face.
  std::vector<std::vector<PathMeasure<T>>> family;
  /// singleton[h][x] is false when the face still had distinct vertices.
  std::vector<std::vector<bool>> singleton;
  /// sizes[h][x][n]: face size after the n-th functional.
  std::vector<std::vector<std::vector<std::size_t>>> sizes;
  std::size_t steps = 0;

  int horizon() const noexcept { return static_cast<int>(family.size()) - 1; }
  const PathMeasure<T>& at(int x) const { return at(x, horizon()); }
  const PathMeasure<T>& at(int x, int h) const {
    return family.at(static_cast<std::size_t>(h)).at(static_cast<std::size_t>(x));
  }
  bool all_singleton() const {
    for (const auto& row : singleton) {
      for (bool b : row) {
        if (!b) return false;
      }
    }
    return true;
  }
};

template <class T>
MarkovSelection<T> markov_select(const DiscreteKrylovMap<T>& K, const MarkovEnumeration& e,
                                 const MarkovSelectOptions& opts = {}) {
  const std::size_t n_max = opts.n_max == 0 ? e.size() : opts.n_max;
  if (n_max > e.size()) {
    throw PreconditionError("n_max " + std::to_string(n_max) + " exceeds the enumeration length " +
                            std::to_string(e.size()));
  }
  for (const auto& phi : e.phi_list) {
    if (static_cast<int>(phi.size()) != K.m()) throw PreconditionError("phi must be defined on every state");
  }
  MarkovSelection<T> sel;
  sel.faces = K.sets;
  sel.steps = n_max;
  const auto H = static_cast<std::size_t>(K.horizon()) + 1;
  sel.family.resize(H);
  sel.singleton.resize(H);
  sel.sizes.resize(H);
  for (std::size_t h = 0; h < H; ++h) {
    auto& layer = sel.faces[h];
    sel.sizes[h].resize(layer.size());
    std::vector<std::vector<double>> etas;
    for (std::size_t n = 0; n < n_max; ++n) {
      etas.push_back(laplace_coefficients(layer.front().space, e.lambda(n), e.phi(n), 0, static_cast<int>(h) + 1));
    }
    for (std::size_t x = 0; x < layer.size(); ++x) {
      auto& C = layer[x];
      for (std::size_t n = 0; n < n_max; ++n) {
        if (C.size() > 1) C = V_eta(C, etas[n], opts.face_tol);
        sel.sizes[h][x].push_back(C.size());
      }
      sel.singleton[h].push_back(C.size() == 1 || width_bound(C) <= opts.singleton_tol);
      sel.family[h].push_back(C.vertex(0));
    }
  }
  return sel;
}

struct MarkovCheckReport {
  bool pass = true;
  int s = 0;
  /// max |theta_s P_x - sum_w P_x(w) P_{w(s)}| over x and tail paths.
  double seven_defect = 0.0;
  /// max |P_x[theta_s^{-1} . | F_s] - P_{w(s)}| over positive-probability prefixes.
  double eight_defect = 0.0;
  /// max |p_{t+s}(x, y) - sum_z p_s(x, z) p_t(z, y)|.
  double ck_defect = 0.0;
  /// Same as seven_defect with P_{w(s)} taken as the truncated horizon-N selection.
  double truncation_defect = 0.0;
  int witness_state = 0;
};

template <class T>
MarkovCheckReport check_markov(const MarkovSelection<T>& sel, int s, double tol = 1e-9) {
  const int N = sel.horizon();
  if (s < 0 || s > N) throw OutOfRangeError("s = " + std::to_string(s) + " outside [0, " + std::to_string(N) + "]");
  auto dist = [](const T& a, const T& b) {
    T d = a - b;
    if (d < T(0)) d = -d;
    return detail::as_double(d);
  };
  MarkovCheckReport rep;
  rep.s = s;
  double worst = -1.0;
  for (std::size_t x = 0; x < sel.family[static_cast<std::size_t>(N)].size(); ++x) {
    const auto& P = sel.at(static_cast<int>(x), N);
    if (P.space.horizon() != N) throw OutOfRangeError("selected measure has the wrong horizon");
    const int m = P.space.m();
    const auto lhs = shift_measure(P, s);
    const auto mu = P.marginal(s);
    std::vector<T> rhs(lhs.probs.size(), T(0));
    std::vector<T> trunc(lhs.probs.size(), T(0));
    for (int z = 0; z < m; ++z) {
      const T& wz = mu[static_cast<std::size_t>(z)];
      if (!(wz > T(0))) continue;
      const auto& tail = sel.at(z, N - s);
      for (std::size_t v = 0; v < tail.probs.size(); ++v) rhs[v] += wz * tail.probs[v];
      const auto& full = sel.at(z, N);
      const std::size_t drop = full.space.power(s);
      for (std::size_t w = 0; w < full.probs.size(); ++w) trunc[w / drop] += wz * full.probs[w];
    }
    double seven = 0.0;
    for (std::size_t v = 0; v < rhs.size(); ++v) {
      seven = std::max(seven, dist(lhs.probs[v], rhs[v]));
      rep.truncation_defect = std::max(rep.truncation_defect, dist(lhs.probs[v], trunc[v]));
    }

    double eight = 0.0;
    const auto masses = P.prefix_masses(s);
    for (std::size_t p = 0; p < masses.size(); ++p) {
      if (!(masses[p] > T(0))) continue;
      const auto cond = conditional(P, s, p);
      const auto& target = sel.at(P.space.prefix_end(p), N - s);
      for (std::size_t v = 0; v < cond.probs.size(); ++v) eight = std::max(eight, dist(cond.probs[v], target.probs[v]));
    }

    double ck = 0.0;
    for (int t = 0; t + s <= N; ++t) {
      const auto direct = P.marginal(t + s);
      std::vector<T> composed(static_cast<std::size_t>(m), T(0));
      for (int z = 0; z < m; ++z) {
        if (!(mu[static_cast<std::size_t>(z)] > T(0))) continue;
        const auto pt = sel.at(z, N - s).marginal(t);
        for (int y = 0; y < m; ++y) composed[static_cast<std::size_t>(y)] += mu[static_cast<std::size_t>(z)] * pt[static_cast<std::size_t>(y)];
      }
      for (int y = 0; y < m; ++y) ck = std::max(ck, dist(direct[static_cast<std::size_t>(y)], composed[static_cast<std::size_t>(y)]));
    }

    rep.seven_defect = std::max(rep.seven_defect, seven);
    rep.eight_defect = std::max(rep.eight_defect, eight);
    rep.ck_defect = std::max(rep.ck_defect, ck);
    const double local = std::max({seven, eight, ck});
    if (local > worst) {
      worst = local;
      rep.witness_state = static_cast<int>(x);
    }
  }
  rep.pass = rep.seven_defect <= tol && rep.eight_defect <= tol && rep.ck_defect <= tol;
  return rep;
}

/// All splice times 0..N folded into one report (s of the worst case).
template <class T>
MarkovCheckReport check_markov_all(const MarkovSelection<T>& sel, double tol = 1e-9) {
  MarkovCheckReport agg;
  double worst = -1.0;
  for (int s = 0; s <= sel.horizon(); ++s) {
    const auto r = check_markov(sel, s, tol);
    agg.pass = agg.pass && r.pass;
    agg.seven_defect = std::max(agg.seven_defect, r.seven_defect);
    agg.eight_defect = std::max(agg.eight_defect, r.eight_defect);
    agg.ck_defect = std::max(agg.ck_defect, r.ck_defect);
    agg.truncation_defect = std::max(agg.truncation_defect, r.truncation_defect);
    const double local = std::max({r.seven_defect, r.eight_defect, r.ck_defect});
    if (local > worst) {
      worst = local;
      agg.s = s;
      agg.witness_state = r.witness_state;
    }
  }
  return agg;
}

struct KrylovPropertyOptions {
  /// Vertices of each C_N(x) examined (evenly strided when there are more).
  std::size_t max_measures = 16;
  /// Vertices of K(P, s, C) realized through splicing, per (P, s).
  std::size_t k_samples = 3;
  std::size_t battery = 100;
  std::uint64_t seed = 0;
  double tol = 1e-9;
};

struct KrylovPropertyReport {
  bool kp1 = true;
  bool kp2 = true;
  /// max over the battery of theta_s P f - int h_{w(s)}[f] dP (positive part).
  double kp1_domination = 0.0;
  /// Worst membership defect of the conditionals P[theta_s^{-1} . | F_s] in C(w(s)).
  double kp1_conditional = 0.0;
  double kp2_strassen_residual = 0.0;
  /// max |theta_s (P (x)_s Q) - target vertex|.
  double kp2_shift = 0.0;
  double kp2_membership = 0.0;
  /// max over the enumeration of zeta^s(P) - zeta^s(P (x)_s Q) (positive part).
  double kp2_zeta = 0.0;
  std::size_t measures = 0;
  std::size_t k_vertices = 0;
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

inline std::vector<std::size_t> strided(std::size_t n, std::size_t k) {
  std::vector<std::size_t> out;
  if (n <= k) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  for (std::size_t i = 0; i < k; ++i) out.push_back(i * (n - 1) / (k - 1));
  return out;
}

}  // namespace detail

/// KP1 and KP2 on the generated map. KP2 takes random vertices of K(P, s, C),
/// disintegrates them, splices the kernel onto P and checks that the result
/// lies in C_N(x), agrees with P up to time s and shifts back to the vertex.
inline KrylovPropertyReport check_krylov_properties(const DiscreteKrylovMap<double>& K, const MarkovEnumeration& e,
                                                    const KrylovPropertyOptions& opts = {}) {
  KrylovPropertyReport rep;
  const int N = K.horizon();
  const int m = K.m();
  std::mt19937_64 rng(opts.seed);
  for (int s = 1; s <= N; ++s) {
    const FinitePathSpace tails(m, N - s);
    const auto battery = functional_battery(tails.size(), opts.battery, opts.seed + static_cast<std::uint64_t>(s));
    std::vector<std::vector<double>> h(battery.size(), std::vector<double>(static_cast<std::size_t>(m)));
    for (std::size_t i = 0; i < battery.size(); ++i) {
      for (int z = 0; z < m; ++z) h[i][static_cast<std::size_t>(z)] = support_function(K.at(z, N - s), battery[i]);
    }
    std::vector<std::vector<double>> partial;
    for (std::size_t n = 0; n < e.size(); ++n) {
      partial.push_back(laplace_coefficients(K.at(0).space, e.lambda(n), e.phi(n), 0, s));
    }

    for (int x = 0; x < m; ++x) {
      const auto& C = K.at(x);
      for (std::size_t idx : detail::strided(C.size(), opts.max_measures)) {
        const auto P = C.vertex(idx);
        ++rep.measures;
        const auto shifted = shift_measure(P, s);
        const auto mu = P.marginal(s);
        for (std::size_t i = 0; i < battery.size(); ++i) {
          double bound = 0.0;
          for (int z = 0; z < m; ++z) bound += mu[static_cast<std::size_t>(z)] * h[i][static_cast<std::size_t>(z)];
          rep.kp1_domination = std::max(rep.kp1_domination, expect(battery[i], shifted.probs) - bound);
        }
        const auto masses = P.prefix_masses(s);
        for (std::size_t p = 0; p < masses.size(); ++p) {
          if (masses[p] <= 0.0) continue;
          const auto cond = conditional(P, s, p);
          const auto mem = krylov_membership(K.chain, P.space.prefix_end(p), cond, opts.tol);
          rep.kp1_conditional = std::max(rep.kp1_conditional, mem.defect);
        }

        for (std::size_t k = 0; k < opts.k_samples; ++k) {
          PathMeasure<double> target(tails);
          for (int z = 0; z < m; ++z) {
            if (!(mu[static_cast<std::size_t>(z)] > 0.0)) continue;
            const auto& Cz = K.at(z, N - s);
            const auto& v = Cz.vertices[detail::uniform_index(rng, Cz.size())];
            for (std::size_t u = 0; u < v.size(); ++u) target.probs[u] += mu[static_cast<std::size_t>(z)] * v[u];
          }
          ++rep.k_vertices;
          const auto dis = strassen_disintegrate(target, P, s, K.sets);
          if (!dis.feasible) {
            rep.kp2_strassen_residual = std::max(rep.kp2_strassen_residual, std::max(dis.lp_residual, 1.0));
            continue;
          }
          rep.kp2_strassen_residual = std::max(rep.kp2_strassen_residual, dis.residual);
          const auto R = splice_measures(P, s, dis.kernel);
          const auto back = shift_measure(R, s);
          for (std::size_t v = 0; v < back.probs.size(); ++v) {
            rep.kp2_shift = std::max(rep.kp2_shift, std::abs(back.probs[v] - target.probs[v]));
          }
          rep.kp2_membership = std::max(rep.kp2_membership, krylov_membership(K.chain, x, R, opts.tol).defect);
          for (const auto& eta : partial) {
            rep.kp2_zeta = std::max(rep.kp2_zeta, markov::apply(eta, P) - markov::apply(eta, R));
          }
        }
      }
    }
  }
  rep.kp1 = rep.kp1_domination <= opts.tol && rep.kp1_conditional <= opts.tol;
  rep.kp2 = rep.kp2_strassen_residual <= opts.tol && rep.kp2_shift <= opts.tol && rep.kp2_membership <= opts.tol &&
            rep.kp2_zeta <= opts.tol;
  return rep;
}

}  // namespace semiflow::markov
