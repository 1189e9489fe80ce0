#pragma once

// Dense phase-one simplex for {A x = b, x >= 0}. On infeasibility the final
// duals give a Farkas certificate y with y^T A <= 0 and y^T b > 0.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "semiflow/error.hpp"

namespace semiflow::markov {

struct LpOptions {
  /// Phase-one optimum (the l1 residual |Ax - b|) accepted as feasible.
  double feas_tol = 1e-10;
  double pivot_tol = 1e-12;
  double cost_tol = 1e-11;
  /// Degenerate pivots in a row before switching from Dantzig to Bland.
  std::size_t degenerate_limit = 50;
};

struct LpResult {
  bool feasible = false;
  std::vector<double> x;
  /// Farkas vector, filled only when infeasible.
  std::vector<double> y;
  /// Phase-one optimum.
  double residual = 0.0;
  std::size_t pivots = 0;
};

/// A is row-major, rows x cols.
inline LpResult solve_feasibility(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                                  const LpOptions& opts = {}) {
  const std::size_t rows = A.size();
  if (b.size() != rows) throw PreconditionError("right-hand side length does not match the constraint count");
  const std::size_t cols = rows ? A.front().size() : 0;
  for (const auto& r : A) {
    if (r.size() != cols) throw PreconditionError("ragged constraint matrix");
  }
  const std::size_t width = cols + rows + 1;
  const std::size_t rhs = width - 1;

  std::vector<double> sign(rows, 1.0);
  std::vector<std::vector<double>> T(rows, std::vector<double>(width, 0.0));
  for (std::size_t i = 0; i < rows; ++i) {
    if (b[i] < 0.0) sign[i] = -1.0;
    for (std::size_t j = 0; j < cols; ++j) T[i][j] = sign[i] * A[i][j];
    T[i][cols + i] = 1.0;
    T[i][rhs] = sign[i] * b[i];
  }
  std::vector<std::size_t> basis(rows);
  for (std::size_t i = 0; i < rows; ++i) basis[i] = cols + i;

  // Reduced costs of the phase-one objective sum(artificials); the last
  // entry holds minus the objective value.
  std::vector<double> d(width, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) d[j] -= T[i][j];
    d[rhs] -= T[i][rhs];
  }

  LpResult out;
  const std::size_t max_pivots = 50 * (rows + cols) + 1000;
  std::size_t degenerate_run = 0;
  while (true) {
    const bool bland = degenerate_run >= opts.degenerate_limit;
    std::size_t enter = width;
    double best = -opts.cost_tol;
    for (std::size_t j = 0; j + 1 < width; ++j) {
      if (d[j] < best) {
        enter = j;
        if (bland) break;
        best = d[j];
      }
    }
    if (enter == width) break;

    std::size_t leave = rows;
    double ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows; ++i) {
      const double a = T[i][enter];
      if (a <= opts.pivot_tol) continue;
      const double r = T[i][rhs] / a;
      if (r < ratio - 1e-15 || (r <= ratio + 1e-15 && leave < rows && basis[i] < basis[leave])) {
        ratio = r;
        leave = i;
      }
    }
    // Unbounded directions cannot occur: the phase-one objective is bounded below by 0.
    if (leave == rows) throw Error("simplex ratio test found no pivot row");

    degenerate_run = ratio <= 1e-15 ? degenerate_run + 1 : 0;
    const double piv = T[leave][enter];
    for (double& v : T[leave]) v /= piv;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == leave) continue;
      const double factor = T[i][enter];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j < width; ++j) T[i][j] -= factor * T[leave][j];
    }
    const double factor = d[enter];
    for (std::size_t j = 0; j < width; ++j) d[j] -= factor * T[leave][j];
    basis[leave] = enter;
    if (++out.pivots > max_pivots) {
      throw ResourceError("simplex exceeded " + std::to_string(max_pivots) + " pivots");
    }
  }

  out.residual = -d[rhs];
  if (out.residual <= opts.feas_tol) {
    out.feasible = true;
    out.x.assign(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      if (basis[i] < cols) out.x[basis[i]] = T[i][rhs];
    }
    return out;
  }
  // The reduced cost of artificial i is 1 - y_i for the sign-adjusted rows.
  out.y.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) out.y[i] = sign[i] * (1.0 - d[cols + i]);
  return out;
}

}  // namespace semiflow::markov
