#pragma once

// Strassen disintegration at finite scale: Q in K(P, s, C) iff there are
// Q_prefix in C(prefix endpoint) with sum_prefix P(prefix) Q_prefix = Q.
// Posed as feasibility over per-prefix convex weights of the vertices; the
// Farkas vector of an infeasible instance yields f with Qf > int h_{w(s)}[f] dP.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "semiflow/error.hpp"
#include "semiflow/markov/krylov.hpp"
#include "semiflow/markov/path_measure.hpp"
#include "semiflow/markov/polytope.hpp"
#include "semiflow/markov/simplex.hpp"

namespace semiflow::markov {

struct StrassenResult {
  bool feasible = false;
  MarkovKernelSelection<double> kernel;
  /// max_v |sum_prefix P(prefix) Q_prefix(v) - Q(v)| for the returned kernel.
  double residual = 0.0;
  /// Separating functional on the tail space, scaled to max |f| = 1.
  std::vector<double> witness;
  /// Qf - sum_prefix P(prefix) h_{endpoint}[f], recomputed directly.
  double margin = 0.0;
  double lp_residual = 0.0;
};

inline StrassenResult strassen_disintegrate(const PathMeasure<double>& Q, const PathMeasure<double>& P, int s,
                                            const PolytopeFamily<double>& family, const LpOptions& lp = {}) {
  const int N = P.space.horizon();
  if (s < 0 || s > N) throw OutOfRangeError("splice time outside [0, N]");
  const FinitePathSpace tails = P.space.shifted(s);
  if (!(Q.space == tails)) throw PreconditionError("Q must live on the tail space of horizon N - s");
  const int h = N - s;
  const auto& layer = family.at(static_cast<std::size_t>(h));
  const auto masses = P.prefix_masses(s);

  std::vector<std::size_t> prefixes;
  for (std::size_t p = 0; p < masses.size(); ++p) {
    if (masses[p] > 0.0) prefixes.push_back(p);
  }
  std::size_t cols = 0;
  for (std::size_t p : prefixes) {
    const auto& C = layer.at(static_cast<std::size_t>(P.space.prefix_end(p)));
    if (C.empty()) throw ModelError("empty constraint set at a reachable endpoint");
    cols += C.size();
  }

  const std::size_t M = tails.size();
  std::vector<std::vector<double>> A(M + prefixes.size(), std::vector<double>(cols, 0.0));
  std::vector<double> b(M + prefixes.size(), 1.0);
  for (std::size_t v = 0; v < M; ++v) b[v] = Q.probs[v];
  std::size_t col = 0;
  for (std::size_t k = 0; k < prefixes.size(); ++k) {
    const std::size_t p = prefixes[k];
    const auto& C = layer[static_cast<std::size_t>(P.space.prefix_end(p))];
    for (const auto& vert : C.vertices) {
      for (std::size_t v = 0; v < M; ++v) A[v][col] = masses[p] * vert[v];
      A[M + k][col] = 1.0;
      ++col;
    }
  }

  const LpResult sol = solve_feasibility(A, b, lp);
  StrassenResult out;
  out.lp_residual = sol.residual;
  out.kernel.s = s;
  if (sol.feasible) {
    out.feasible = true;
    std::vector<double> rebuilt(M, 0.0);
    col = 0;
    for (std::size_t p : prefixes) {
      const auto& C = layer[static_cast<std::size_t>(P.space.prefix_end(p))];
      std::vector<double> weights(C.size());
      double total = 0.0;
      for (std::size_t i = 0; i < C.size(); ++i) {
        weights[i] = std::max(0.0, sol.x[col + i]);
        total += weights[i];
      }
      col += C.size();
      PathMeasure<double> q(tails);
      for (std::size_t i = 0; i < C.size(); ++i) {
        if (weights[i] == 0.0) continue;
        for (std::size_t v = 0; v < M; ++v) q.probs[v] += weights[i] / total * C.vertices[i][v];
      }
      for (std::size_t v = 0; v < M; ++v) rebuilt[v] += masses[p] * q.probs[v];
      out.kernel.kernels.emplace(p, std::move(q));
    }
    for (std::size_t v = 0; v < M; ++v) out.residual = std::max(out.residual, std::abs(rebuilt[v] - Q.probs[v]));
    return out;
  }

  std::vector<double> f(sol.y.begin(), sol.y.begin() + static_cast<std::ptrdiff_t>(M));
  double scale = 0.0;
  for (double v : f) scale = std::max(scale, std::abs(v));
  if (scale > 0.0) {
    for (double& v : f) v /= scale;
  }
  out.margin = expect(f, Q.probs) - integrated_support(P, s, family, f);
  out.witness = std::move(f);
  return out;
}

}  // namespace semiflow::markov
