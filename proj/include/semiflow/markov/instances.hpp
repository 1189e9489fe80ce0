#pragma once

// Seeded random controlled chains and constructed members / non-members of
// K(P, s, C) for exercising the disintegration.

#include <algorithm>
#include <cstddef>
#include <random>
#include <utility>
#include <vector>

#include "semiflow/error.hpp"
#include "semiflow/markov/krylov.hpp"
#include "semiflow/markov/path_measure.hpp"
#include "semiflow/markov/select.hpp"

namespace semiflow::markov {

struct InstanceOptions {
  int m_max = 3;
  int N_max = 3;
  std::size_t actions_max = 2;
  /// Integer weights per row entry are drawn from 0..weight_max.
  int weight_max = 4;
};

inline std::vector<double> random_row(std::mt19937_64& rng, int m, int weight_max) {
  std::vector<double> w(static_cast<std::size_t>(m));
  double total = 0.0;
  while (total == 0.0) {
    total = 0.0;
    for (auto& v : w) {
      v = static_cast<double>(detail::uniform_index(rng, static_cast<std::size_t>(weight_max) + 1));
      total += v;
    }
  }
  for (auto& v : w) v /= total;
  return w;
}

inline ControlledChain random_chain(std::mt19937_64& rng, const InstanceOptions& opts = {}) {
  if (opts.m_max < 2 || opts.N_max < 1 || opts.actions_max < 1) throw PreconditionError("degenerate instance bounds");
  ControlledChain c;
  c.m = 2 + static_cast<int>(detail::uniform_index(rng, static_cast<std::size_t>(opts.m_max - 1)));
  c.N = 1 + static_cast<int>(detail::uniform_index(rng, static_cast<std::size_t>(opts.N_max)));
  c.rows.resize(static_cast<std::size_t>(c.m));
  for (auto& rx : c.rows) {
    const std::size_t actions = 1 + detail::uniform_index(rng, opts.actions_max);
    for (std::size_t a = 0; a < actions; ++a) rx.push_back(random_row(rng, c.m, opts.weight_max));
  }
  return c;
}

/// Random point of C: a two-vertex mixture.
inline PathMeasure<double> random_member(std::mt19937_64& rng, const MeasurePolytope<double>& C) {
  const auto& a = C.vertices[detail::uniform_index(rng, C.size())];
  const auto& b = C.vertices[detail::uniform_index(rng, C.size())];
  const double t = detail::uniform01(rng);
  PathMeasure<double> P(C.space);
  for (std::size_t w = 0; w < a.size(); ++w) P.probs[w] = t * a[w] + (1.0 - t) * b[w];
  return P;
}

struct KMember {
  PathMeasure<double> Q;
  MarkovKernelSelection<double> kernel;
};

/// sum_prefix P(prefix) Q_prefix with each Q_prefix a random member of C(endpoint).
inline KMember random_K_member(std::mt19937_64& rng, const PathMeasure<double>& P, int s,
                               const PolytopeFamily<double>& family) {
  const FinitePathSpace tails = P.space.shifted(s);
  const auto& layer = family.at(static_cast<std::size_t>(tails.horizon()));
  KMember out{PathMeasure<double>(tails), {}};
  out.kernel.s = s;
  const auto masses = P.prefix_masses(s);
  for (std::size_t p = 0; p < masses.size(); ++p) {
    if (!(masses[p] > 0.0)) continue;
    auto q = random_member(rng, layer.at(static_cast<std::size_t>(P.space.prefix_end(p))));
    for (std::size_t v = 0; v < q.probs.size(); ++v) out.Q.probs[v] += masses[p] * q.probs[v];
    out.kernel.kernels.emplace(p, std::move(q));
  }
  return out;
}

struct KViolation {
  PathMeasure<double> Q;
  /// Functional certifying Q outside K: f.Q exceeds the support value by `excess`.
  std::vector<double> f;
  double excess = 0.0;
};

/// Moves mass from the K-maximizer of a random f towards a path with larger f.
/// The result is a probability measure with f.Q = h_K[f] + excess.
inline KViolation violating_measure(std::mt19937_64& rng, const PathMeasure<double>& P, int s,
                                    const PolytopeFamily<double>& family, double min_gap = 0.05) {
  const FinitePathSpace tails = P.space.shifted(s);
  const auto& layer = family.at(static_cast<std::size_t>(tails.horizon()));
  const auto mu = P.marginal(s);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const auto f = functional_battery(tails.size(), 1, rng()).front();
    PathMeasure<double> best(tails);
    for (int z = 0; z < P.space.m(); ++z) {
      if (!(mu[static_cast<std::size_t>(z)] > 0.0)) continue;
      const auto& C = layer.at(static_cast<std::size_t>(z));
      const auto& v = C.vertices[support_argmax(C, f).second];
      for (std::size_t u = 0; u < v.size(); ++u) best.probs[u] += mu[static_cast<std::size_t>(z)] * v[u];
    }
    std::size_t lo = tails.size();
    for (std::size_t u = 0; u < tails.size(); ++u) {
      if (best.probs[u] > 1e-6 && (lo == tails.size() || f[u] < f[lo])) lo = u;
    }
    const std::size_t hi = static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
    if (lo == tails.size() || f[hi] - f[lo] < min_gap) continue;
    const double t = 0.5 * best.probs[lo];
    KViolation out{best, f, t * (f[hi] - f[lo])};
    out.Q.probs[lo] -= t;
    out.Q.probs[hi] += t;
    return out;
  }
  throw Error("no violating measure found");
}

}  // namespace semiflow::markov
