#pragma once

// Krylov maps generated by controlled chains. C_h(x) is the convex hull of
// the path measures of horizon h induced by deterministic history-dependent
// choices of a kernel row at every visited state. Horizons 0..N are all kept
// because the tails theta_s P live on horizon N - s.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/error.hpp"
#include "semiflow/markov/path_measure.hpp"
#include "semiflow/markov/polytope.hpp"
#include "semiflow/markov/simplex.hpp"

namespace semiflow::markov {

/// rows[x] lists the admissible transition rows at state x.
struct ControlledChain {
  int m = 0;
  int N = 0;
  std::vector<std::vector<std::vector<double>>> rows;

  void validate(std::size_t max_rows = 16) const {
    if (m < 2) throw ModelError("a controlled chain needs at least two states");
    if (N < 1) throw ModelError("a controlled chain needs horizon at least 1");
    if (static_cast<int>(rows.size()) != m) throw ModelError("kernel rows must be given for every state");
    for (int x = 0; x < m; ++x) {
      const auto& rx = rows[static_cast<std::size_t>(x)];
      if (rx.empty()) throw ModelError("state " + std::to_string(x) + " has no kernel row");
      if (rx.size() > max_rows) {
        throw ResourceError("state " + std::to_string(x) + " has more than " + std::to_string(max_rows) + " rows");
      }
      for (const auto& r : rx) {
        if (static_cast<int>(r.size()) != m) throw ModelError("kernel row of wrong length at state " + std::to_string(x));
        double acc = 0.0;
        for (double p : r) {
          if (!(p >= 0.0) || !std::isfinite(p)) throw ModelError("kernel row with a negative entry");
          acc += p;
        }
        if (std::abs(acc - 1.0) > 1e-12) throw ModelError("kernel row at state " + std::to_string(x) + " does not sum to one");
      }
    }
  }
};

struct KrylovOptions {
  std::size_t path_cap = kDefaultPathCap;
  std::size_t vertex_cap = std::size_t{1} << 16;
  std::size_t max_rows = 16;
};

/// family[h][x] is a polytope of measures on horizon-h paths started at x.
template <class T = double>
using PolytopeFamily = std::vector<std::vector<MeasurePolytope<T>>>;

template <class T = double>
struct DiscreteKrylovMap {
  ControlledChain chain;
  PolytopeFamily<T> sets;

  int m() const noexcept { return chain.m; }
  int horizon() const noexcept { return chain.N; }
  const MeasurePolytope<T>& at(int x) const { return at(x, chain.N); }
  const MeasurePolytope<T>& at(int x, int h) const {
    return sets.at(static_cast<std::size_t>(h)).at(static_cast<std::size_t>(x));
  }
};

namespace detail {

template <class T>
std::vector<T> exact_row(const std::vector<double>& r) {
  std::vector<T> out;
  T sum(0);
  for (double p : r) {
    out.emplace_back(p);
    sum += out.back();
  }
  for (auto& p : out) p /= sum;
  return out;
}

}  // namespace detail

template <class T = double>
DiscreteKrylovMap<T> generate_krylov_map(const ControlledChain& chain, const KrylovOptions& opts = {}) {
  chain.validate(opts.max_rows);
  const int m = chain.m;
  DiscreteKrylovMap<T> K{chain, {}};
  K.sets.resize(static_cast<std::size_t>(chain.N) + 1);

  const FinitePathSpace space0(m, 0, opts.path_cap);
  for (int x = 0; x < m; ++x) {
    K.sets[0].push_back(MeasurePolytope<T>::singleton(PathMeasure<T>::delta(space0, static_cast<std::size_t>(x)), x));
  }

  for (int h = 1; h <= chain.N; ++h) {
    const FinitePathSpace space(m, h, opts.path_cap);
    const std::size_t block = space.power(h);
    const auto& prev = K.sets[static_cast<std::size_t>(h) - 1];
    for (int x = 0; x < m; ++x) {
      std::size_t count = 0;
      for (const auto& r : chain.rows[static_cast<std::size_t>(x)]) {
        std::size_t c = 1;
        for (int z = 0; z < m; ++z) {
          if (r[static_cast<std::size_t>(z)] > 0.0) c *= prev[static_cast<std::size_t>(z)].size();
          if (c > opts.vertex_cap) break;
        }
        count += c;
        if (count > opts.vertex_cap) {
          throw ResourceError("Krylov set at state " + std::to_string(x) + ", horizon " + std::to_string(h) +
                              " exceeds the vertex cap of " + std::to_string(opts.vertex_cap));
        }
      }

      std::vector<std::vector<T>> verts;
      verts.reserve(count);
      for (const auto& r_raw : chain.rows[static_cast<std::size_t>(x)]) {
        const auto r = detail::exact_row<T>(r_raw);
        std::vector<int> support;
        for (int z = 0; z < m; ++z) {
          if (r_raw[static_cast<std::size_t>(z)] > 0.0) support.push_back(z);
        }
        std::vector<std::size_t> choice(support.size(), 0);
        while (true) {
          std::vector<T> v(space.size(), T(0));
          for (std::size_t k = 0; k < support.size(); ++k) {
            const int z = support[k];
            const auto& mu = prev[static_cast<std::size_t>(z)].vertices[choice[k]];
            const std::size_t lo = static_cast<std::size_t>(z) * (block / static_cast<std::size_t>(m));
            const std::size_t hi = lo + block / static_cast<std::size_t>(m);
            for (std::size_t u = lo; u < hi; ++u) {
              if (mu[u] != T(0)) v[static_cast<std::size_t>(x) * block + u] = r[static_cast<std::size_t>(z)] * mu[u];
            }
          }
          verts.push_back(std::move(v));
          std::size_t k = 0;
          for (; k < support.size(); ++k) {
            if (++choice[k] < prev[static_cast<std::size_t>(support[k])].size()) break;
            choice[k] = 0;
          }
          if (k == support.size()) break;
        }
      }
      dedupe(verts);
      K.sets[static_cast<std::size_t>(h)].push_back({space, std::move(verts), x});
    }
  }
  return K;
}

/// Membership of P in C_N(x) without enumerating vertices: P must start at x
/// and, after every positive-probability history ending at z, the next-step
/// law must be a mixture of the rows at z (randomized history-dependent
/// choices generate exactly the convex hull of the deterministic ones).
struct MembershipReport {
  bool member = true;
  /// Largest l1 residual of a next-step law against conv(rows), or the mass off x.
  double defect = 0.0;
  std::size_t histories = 0;
};

inline MembershipReport krylov_membership(const ControlledChain& chain, int x, const PathMeasure<double>& P,
                                          double tol = 1e-9) {
  if (P.space.m() != chain.m) throw PreconditionError("measure and chain disagree on the state count");
  MembershipReport rep;
  const auto start = P.marginal(0);
  rep.defect = 1.0 - start[static_cast<std::size_t>(x)];
  const int N = P.space.horizon();
  const int m = chain.m;
  for (int t = 0; t < N; ++t) {
    const auto now = P.prefix_masses(t);
    const auto next = P.prefix_masses(t + 1);
    for (std::size_t p = 0; p < now.size(); ++p) {
      if (now[p] <= 1e-13) continue;
      ++rep.histories;
      const int z = static_cast<int>(p % static_cast<std::size_t>(m));
      const auto& rows = chain.rows[static_cast<std::size_t>(z)];
      std::vector<double> law(static_cast<std::size_t>(m));
      for (int y = 0; y < m; ++y) law[static_cast<std::size_t>(y)] = next[p * static_cast<std::size_t>(m) + y] / now[p];
      // law = sum_a c_a rows[a], sum c_a = 1, c >= 0.
      std::vector<std::vector<double>> A(static_cast<std::size_t>(m) + 1, std::vector<double>(rows.size()));
      std::vector<double> b(static_cast<std::size_t>(m) + 1);
      for (std::size_t a = 0; a < rows.size(); ++a) {
        for (int y = 0; y < m; ++y) A[static_cast<std::size_t>(y)][a] = rows[a][static_cast<std::size_t>(y)];
        A[static_cast<std::size_t>(m)][a] = 1.0;
      }
      for (int y = 0; y < m; ++y) b[static_cast<std::size_t>(y)] = law[static_cast<std::size_t>(y)];
      b[static_cast<std::size_t>(m)] = 1.0;
      const auto lp = solve_feasibility(A, b);
      rep.defect = std::max(rep.defect, lp.residual);
    }
  }
  rep.member = rep.defect <= tol;
  return rep;
}

/// Probability of w(s) = z under P, i.e. the endpoint law of the prefixes at s.
template <class T>
std::vector<T> endpoint_masses(const PathMeasure<T>& P, int s) {
  return P.marginal(s);
}

/// K(P, s, C) = { sum_prefix P(prefix) Q_prefix : Q_prefix in C(prefix endpoint) }.
/// Prefixes sharing an endpoint z contribute mu_s(z) C(z) by convexity, and
/// tails from distinct endpoints have disjoint supports, so the vertices are
/// the products of vertex choices over the reachable endpoints.
template <class T>
MeasurePolytope<T> K_set(const PathMeasure<T>& P, int s, const PolytopeFamily<T>& family,
                         std::size_t vertex_cap = std::size_t{1} << 16) {
  const int N = P.space.horizon();
  if (s < 0 || s > N) throw OutOfRangeError("splice time outside [0, N]");
  const int h = N - s;
  const FinitePathSpace tails = P.space.shifted(s);
  const auto mu = endpoint_masses(P, s);
  const auto& layer = family.at(static_cast<std::size_t>(h));
  std::vector<int> reach;
  std::size_t count = 1;
  for (int z = 0; z < P.space.m(); ++z) {
    if (!(mu[static_cast<std::size_t>(z)] > T(0))) continue;
    const auto& C = layer.at(static_cast<std::size_t>(z));
    if (C.empty()) throw ModelError("empty constraint set at reachable state " + std::to_string(z));
    if (!(C.space == tails)) throw PreconditionError("constraint set lives on the wrong horizon");
    reach.push_back(z);
    count *= C.size();
    if (count > vertex_cap) throw ResourceError("K set exceeds the vertex cap of " + std::to_string(vertex_cap));
  }
  MeasurePolytope<T> out{tails, {}, std::nullopt};
  if (reach.size() == 1) out.base_state = reach.front();
  out.vertices.reserve(count);
  std::vector<std::size_t> choice(reach.size(), 0);
  while (true) {
    std::vector<T> v(tails.size(), T(0));
    for (std::size_t k = 0; k < reach.size(); ++k) {
      const T& weight = mu[static_cast<std::size_t>(reach[k])];
      const auto& q = layer[static_cast<std::size_t>(reach[k])].vertices[choice[k]];
      for (std::size_t u = 0; u < q.size(); ++u) {
        if (q[u] != T(0)) v[u] += weight * q[u];
      }
    }
    out.vertices.push_back(std::move(v));
    std::size_t k = 0;
    for (; k < reach.size(); ++k) {
      if (++choice[k] < layer[static_cast<std::size_t>(reach[k])].size()) break;
      choice[k] = 0;
    }
    if (k == reach.size()) break;
  }
  return out;
}

/// sum over prefixes of P(prefix) h_{endpoint}[f], evaluated prefix by prefix.
template <class T>
T integrated_support(const PathMeasure<T>& P, int s, const PolytopeFamily<T>& family, const std::vector<double>& f) {
  const int h = P.space.horizon() - s;
  const auto masses = P.prefix_masses(s);
  const auto& layer = family.at(static_cast<std::size_t>(h));
  std::vector<std::optional<T>> cache(static_cast<std::size_t>(P.space.m()));
  T acc(0);
  for (std::size_t p = 0; p < masses.size(); ++p) {
    if (!(masses[p] > T(0))) continue;
    const auto z = static_cast<std::size_t>(P.space.prefix_end(p));
    if (!cache[z]) cache[z] = support_function(layer.at(z), f);
    acc += masses[p] * *cache[z];
  }
  return acc;
}

/// Applies V_eta to every set of horizon h, leaving the other horizons alone.
template <class T>
PolytopeFamily<T> V_eta_family(const PolytopeFamily<T>& family, int h, const std::vector<double>& eta,
                               double face_tol = kDefaultFaceTol) {
  PolytopeFamily<T> out = family;
  for (auto& C : out.at(static_cast<std::size_t>(h))) C = V_eta(C, eta, face_tol);
  return out;
}

/// Seeded battery of bounded functionals with entries uniform in [-1, 1].
inline std::vector<std::vector<double>> functional_battery(std::size_t dim, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> out(count, std::vector<double>(dim));
  for (auto& f : out) {
    for (auto& v : f) v = 2.0 * (static_cast<double>(rng() >> 11) * 0x1p-53) - 1.0;
  }
  return out;
}

struct CommuteReport {
  bool pass = true;
  double max_defect = 0.0;
  std::size_t checked = 0;
  std::size_t lhs_vertices = 0;
  std::size_t rhs_vertices = 0;
  /// Battery index of the worst functional.
  std::size_t witness = 0;
};

/// Compares V_eta[K(P, s, C)] with K(P, s, V_eta[C]) by mutual support-function
/// domination on the battery. eta acts on the tail space of horizon N - s.
/// With exact scalars pass tol = 0 to demand equality.
template <class T>
CommuteReport check_commute(const PathMeasure<T>& P, int s, const PolytopeFamily<T>& family,
                            const std::vector<double>& eta, const std::vector<std::vector<double>>& battery,
                            double tol = 1e-9, double face_tol = kDefaultFaceTol) {
  const int h = P.space.horizon() - s;
  const auto lhs = V_eta(K_set(P, s, family), eta, face_tol);
  const auto rhs = K_set(P, s, V_eta_family(family, h, eta, face_tol));
  CommuteReport rep;
  rep.lhs_vertices = lhs.size();
  rep.rhs_vertices = rhs.size();
  for (std::size_t i = 0; i < battery.size(); ++i) {
    T diff = support_function(lhs, battery[i]) - support_function(rhs, battery[i]);
    if (diff < T(0)) diff = -diff;
    const double d = detail::as_double(diff);
    if (rep.checked++ == 0 || d > rep.max_defect) {
      rep.max_defect = d;
      rep.witness = i;
    }
  }
  rep.pass = rep.max_defect <= tol;
  return rep;
}

}  // namespace semiflow::markov
