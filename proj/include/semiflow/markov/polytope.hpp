#pragma once

// Vertex-represented convex sets of path measures: support functions,
// maximizing faces and a rounding-aware vertex dedupe.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "semiflow/error.hpp"
#include "semiflow/markov/path_measure.hpp"

namespace semiflow::markov {

inline constexpr double kDefaultFaceTol = 1e-10;

template <class T = double>
struct MeasurePolytope {
  FinitePathSpace space;
  std::vector<std::vector<T>> vertices;
  /// Common starting state of every vertex, when there is one.
  std::optional<int> base_state;

  std::size_t size() const noexcept { return vertices.size(); }
  bool empty() const noexcept { return vertices.empty(); }
  PathMeasure<T> vertex(std::size_t i) const { return PathMeasure<T>(space, vertices.at(i)); }

  static MeasurePolytope singleton(const PathMeasure<T>& P, std::optional<int> base = std::nullopt) {
    return {P.space, {P.probs}, base};
  }
};

namespace detail {

template <class T>
constexpr bool is_float = std::is_floating_point_v<T>;

template <class T>
double as_double(const T& v) {
  return static_cast<double>(v);
}

/// Vertices closer than 2^-40 per coordinate collapse under double rounding.
template <class T>
bool vertex_less(const std::vector<T>& a, const std::vector<T>& b) {
  if constexpr (is_float<T>) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double ka = std::nearbyint(a[i] * 0x1p40);
      const double kb = std::nearbyint(b[i] * 0x1p40);
      if (ka != kb) return ka < kb;
    }
    return false;
  } else {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  }
}

}  // namespace detail

/// Sorts and removes duplicate vertices; the result is independent of input order.
template <class T>
void dedupe(std::vector<std::vector<T>>& vs) {
  std::sort(vs.begin(), vs.end(), [](const auto& a, const auto& b) { return detail::vertex_less(a, b); });
  vs.erase(std::unique(vs.begin(), vs.end(),
                       [](const auto& a, const auto& b) {
                         return !detail::vertex_less(a, b) && !detail::vertex_less(b, a);
                       }),
           vs.end());
}

template <class T>
T expect(const std::vector<double>& f, const std::vector<T>& v) {
  if (f.size() != v.size()) throw PreconditionError("functional and measure sizes differ");
  T acc(0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != T(0)) acc += T(f[i]) * v[i];
  }
  return acc;
}

/// h_C[f] = max over vertices of sum_w f(w) P(w), with the index of a maximizing vertex.
template <class T>
std::pair<T, std::size_t> support_argmax(const MeasurePolytope<T>& C, const std::vector<double>& f) {
  if (C.empty()) throw ModelError("support function of an empty polytope");
  std::size_t best = 0;
  T value = expect(f, C.vertices[0]);
  for (std::size_t i = 1; i < C.size(); ++i) {
    T v = expect(f, C.vertices[i]);
    if (v > value) {
      value = std::move(v);
      best = i;
    }
  }
  return {value, best};
}

template <class T>
T support_function(const MeasurePolytope<T>& C, const std::vector<double>& f) {
  return support_argmax(C, f).first;
}

/// V_eta[C]: the vertices within face_tol of max eta, in their original order.
/// Exact scalars compare without slack.
template <class T>
MeasurePolytope<T> V_eta(const MeasurePolytope<T>& C, const std::vector<double>& eta, double face_tol = kDefaultFaceTol) {
  if (C.empty()) throw ModelError("maximizing face of an empty polytope");
  std::vector<T> values;
  values.reserve(C.size());
  for (const auto& v : C.vertices) values.push_back(expect(eta, v));
  const T best = *std::max_element(values.begin(), values.end());
  MeasurePolytope<T> out{C.space, {}, C.base_state};
  for (std::size_t i = 0; i < C.size(); ++i) {
    bool keep;
    if constexpr (detail::is_float<T>) {
      keep = values[i] >= best - face_tol;
    } else {
      keep = values[i] == best;
    }
    if (keep) out.vertices.push_back(C.vertices[i]);
  }
  return out;
}

/// Upper bound 2 max_i |v_i - v_0|_1 on the l1 diameter, which is the
/// support-function width over the unit ball of bounded f.
template <class T>
double width_bound(const MeasurePolytope<T>& C) {
  double r = 0.0;
  for (std::size_t i = 1; i < C.size(); ++i) {
    double d = 0.0;
    for (std::size_t w = 0; w < C.vertices[i].size(); ++w) {
      d += std::abs(detail::as_double(C.vertices[i][w]) - detail::as_double(C.vertices[0][w]));
    }
    r = std::max(r, d);
  }
  return 2.0 * r;
}

/// Exact pairwise l1 diameter; quadratic in the vertex count.
template <class T>
double diameter(const MeasurePolytope<T>& C) {
  double best = 0.0;
  for (std::size_t i = 0; i < C.size(); ++i) {
    for (std::size_t j = i + 1; j < C.size(); ++j) {
      double d = 0.0;
      for (std::size_t w = 0; w < C.vertices[i].size(); ++w) {
        d += std::abs(detail::as_double(C.vertices[i][w]) - detail::as_double(C.vertices[j][w]));
      }
      best = std::max(best, d);
    }
  }
  return best;
}

}  // namespace semiflow::markov
