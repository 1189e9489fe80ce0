#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "semiflow/path_space.hpp"

using namespace semiflow;

namespace {

Trajectory ramp(const TimeGrid& grid, double c) {
  std::vector<PolynomialPiece> pieces;
  if (c > 0.0) pieces.push_back({0.0, {0.0}});
  pieces.push_back({c, {0.0, 1.0}});
  return Trajectory::from_closed_form(grid, {{PiecewisePolynomial(std::move(pieces))}});
}

// Brute force: level l sees grid points with t <= l.
double metric_oracle(const Trajectory& u, const Trajectory& v, int levels) {
  double total = 0.0;
  for (int l = 1; l <= levels; ++l) {
    double m = 0.0;
    for (std::size_t k = 0; k < u.grid().count(); ++k) {
      if (u.grid().time(k) > l + 1e-12) break;
      m = std::max(m, std::abs(u[k][0] - v[k][0]));
    }
    total += std::ldexp(1.0, -l) * m / (1.0 + m);
  }
  return total;
}

}  // namespace

TEST(TimeGrid, HorizonIsDerivedFromCount) {
  const auto g = TimeGrid::from_horizon(0.01, 8.0);
  EXPECT_EQ(g.count(), 801u);
  EXPECT_DOUBLE_EQ(g.horizon(), 8.0);
  EXPECT_EQ(g.steps_for(0.5), 50u);
  EXPECT_THROW(g.steps_for(0.005), AlignmentError);
  EXPECT_THROW(TimeGrid::from_horizon(0.3, 1.0), AlignmentError);
  EXPECT_THROW(TimeGrid(0.1, 1), PreconditionError);
}

TEST(PiecewisePolynomial, ShiftAndSpliceMatchPointwise) {
  const PiecewisePolynomial p({{0.0, {1.0, -2.0, 0.5}}, {1.5, {3.0, 0.0, 0.0, 1.0}}});
  const auto q = p.shifted(0.75);
  for (double t : {0.0, 0.3, 0.75, 1.2, 2.0, 5.0}) EXPECT_NEAR(q(t), p(t + 0.75), 1e-12) << t;
  const auto tail = PiecewisePolynomial::constant(-1.0);
  const auto j = p.spliced(2.0, tail);
  EXPECT_DOUBLE_EQ(j(1.0), p(1.0));
  EXPECT_DOUBLE_EQ(j(3.0), -1.0);
}

TEST(Shift, RampShiftsToEarlierRamp) {
  const auto grid = TimeGrid::from_horizon(0.1, 4.0);
  const auto w = ramp(grid, 0.7);
  const auto tail = shift(w, 0.5);
  EXPECT_NEAR(tail.horizon(), 3.5, 1e-12);
  const auto expected = ramp(tail.grid(), 0.2);
  for (std::size_t k = 0; k < tail.grid().count(); ++k) EXPECT_NEAR(tail[k][0], expected[k][0], 1e-12);
  EXPECT_EQ(shift(w, 0.0).values(), w.values());
  EXPECT_THROW(shift(w, 4.0), OutOfRangeError);
  EXPECT_THROW(shift(w, 0.25), AlignmentError);
}

TEST(Splice, ConcatenatesAndRejectsGaps) {
  const auto grid = TimeGrid::from_horizon(0.1, 4.0);
  const auto rest = Trajectory::constant(grid, {0.0});
  const auto v0 = ramp(grid, 0.0);
  const auto joined = splice(rest, 1.0, v0);
  const auto v1 = ramp(grid, 1.0);
  EXPECT_EQ(joined.grid().count(), grid.count());
  for (std::size_t k = 0; k < grid.count(); ++k) EXPECT_NEAR(joined[k][0], v1[k][0], 1e-12);
  ASSERT_TRUE(joined.closed_form().has_value());
  EXPECT_NEAR(joined.closed_form()->components[0](3.25), 2.25, 1e-12);

  try {
    splice(v0, 1.0, rest);
    FAIL() << "expected a splice mismatch";
  } catch (const SpliceMismatchError& e) {
    EXPECT_NEAR(e.gap(), 1.0, 1e-12);
  }
  const auto longer = splice(rest, 1.0, v0, {kDefaultSpliceTol, SpliceHorizon::extend});
  EXPECT_NEAR(longer.horizon(), 5.0, 1e-12);
}

TEST(PathMetric, MatchesBruteForce) {
  const auto grid = TimeGrid::from_horizon(0.25, 5.0);
  const auto a = ramp(grid, 0.0);
  const auto b = ramp(grid, 1.5);
  EXPECT_DOUBLE_EQ(path_metric(a, a, 5), 0.0);
  EXPECT_NEAR(path_metric(a, b, 5), metric_oracle(a, b, 5), 1e-15);
  EXPECT_NEAR(path_metric(a, b, 3), metric_oracle(a, b, 3), 1e-15);
  EXPECT_DOUBLE_EQ(path_metric(a, b, 5), path_metric(b, a, 5));
  EXPECT_THROW(path_metric(a, b, 6), PreconditionError);

  const auto c = Trajectory::constant(grid, {0.5});
  const auto z = Trajectory::constant(grid, {0.0});
  double series = 0.0;
  for (int l = 1; l <= 5; ++l) series += std::ldexp(1.0, -l) * 0.5 / 1.5;
  EXPECT_NEAR(path_distance(c, z), series, 1e-15);
}

TEST(PathMetric, RejectsDifferentSteps) {
  const auto a = Trajectory::constant(TimeGrid::from_horizon(0.1, 2.0), {0.0});
  const auto b = Trajectory::constant(TimeGrid::from_horizon(0.2, 2.0), {0.0});
  EXPECT_THROW(path_distance(a, b), GridMismatchError);
  EXPECT_THROW(splice(a, 0.0, b), GridMismatchError);
}

TEST(Evaluate, ClosedFormAllowsOffGridTimes) {
  const auto grid = TimeGrid::from_horizon(0.1, 2.0);
  const auto w = ramp(grid, 0.5);
  EXPECT_NEAR(evaluate(w, 1.25)[0], 0.75, 1e-12);
  EXPECT_THROW(evaluate(w, 2.5), OutOfRangeError);
}
