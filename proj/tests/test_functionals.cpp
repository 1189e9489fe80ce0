#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "semiflow/experiment.hpp"
#include "semiflow/functionals.hpp"
#include "semiflow/funnel.hpp"

using namespace semiflow;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Kronrod on the smooth pieces of e^{-lambda t} min(|max(t - c, 0) - y|, 1),
// with the constant tail integrated exactly.
double ramp_zeta_oracle(double lambda, double y, double c) {
  using boost::math::quadrature::gauss_kronrod;
  auto g = [&](double t) { return std::exp(-lambda * t) * std::min(std::abs(std::max(t - c, 0.0) - y), 1.0); };
  if (std::isinf(c)) return y / lambda;
  double acc = 0.0;
  const double knots[] = {0.0, c, c + y, c + y + 1.0};
  for (int i = 0; i < 3; ++i) {
    if (knots[i + 1] > knots[i]) acc += gauss_kronrod<double, 31>::integrate(g, knots[i], knots[i + 1], 10, 1e-14);
  }
  return acc + std::exp(-lambda * (c + y + 1.0)) / lambda;
}

Trajectory ramp(const TimeGrid& grid, double c) {
  if (std::isinf(c)) return Trajectory::constant(grid, {0.0});
  std::vector<PolynomialPiece> pieces;
  if (c > 0.0) pieces.push_back({0.0, {0.0}});
  pieces.push_back({c, {0.0, 1.0}});
  return Trajectory::from_closed_form(grid, {{PiecewisePolynomial(std::move(pieces))}});
}

}  // namespace

TEST(SeparatingFunction, ClampedDistance) {
  const auto phi = SeparatingFunction::clamped_distance({0.25});
  EXPECT_DOUBLE_EQ(phi({0.0}), 0.25);
  EXPECT_DOUBLE_EQ(phi({3.0}), 1.0);
  EXPECT_DOUBLE_EQ(phi.bound(), 1.0);
  EXPECT_THROW(SeparatingFunction::user_supplied("bad", 0.0, [](const State&) { return 0.0; }), PreconditionError);
}

TEST(LaplaceFunctional, TailBoundIsCertified) {
  for (double lambda : {0.25, 0.5, 1.0}) {
    const LaplaceFunctional f(lambda, SeparatingFunction::clamped_distance({0.5}));
    EXPECT_TRUE(f.tail_certified());
    EXPECT_LE(std::exp(-lambda * f.t_quad()) / lambda, 1e-9);
  }
  EXPECT_THROW(LaplaceFunctional(0.0, SeparatingFunction::clamped_distance({0.0})), PreconditionError);
}

TEST(Zeta, FrozenHighPrecisionValues) {
  const auto grid = TimeGrid::from_horizon(0.01, 8.0);
  struct Case {
    double lambda, y, value;
  };
  // 18-digit reference values of the closed form.
  for (const Case& c : {Case{1.0, 0.25, 0.521096769282619636}, Case{0.5, 0.25, 1.41892950660080225},
                        Case{1.0, 0.8, 0.533359040012856656}}) {
    const LaplaceFunctional f(c.lambda, SeparatingFunction::clamped_distance({c.y}));
    EXPECT_NEAR(zeta(f, ramp(grid, 0.0)).value, c.value, 1e-6);
    EXPECT_NEAR(ramp_zeta_closed_form(c.lambda, c.y, 0.0), c.value, 1e-14);
  }
}

TEST(Zeta, ClosedFormAgreesWithGaussKronrod) {
  for (double lambda : {0.5, 1.0}) {
    for (double y : {0.25, 0.8}) {
      for (double c : {0.0, 0.5, 1.0, kInf}) {
        EXPECT_NEAR(ramp_zeta_closed_form(lambda, y, c), ramp_zeta_oracle(lambda, y, c), 1e-12)
            << lambda << " " << y << " " << c;
      }
    }
  }
}

TEST(Zeta, QuadratureAgreesWithGaussKronrod) {
  const auto grid = TimeGrid::from_horizon(0.01, 8.0);
  for (double lambda : {0.5, 1.0}) {
    for (double y : {0.25, 0.8}) {
      const LaplaceFunctional f(lambda, SeparatingFunction::clamped_distance({y}));
      for (double c : {0.0, 0.5, 1.0, kInf}) {
        const auto z = zeta(f, ramp(grid, c));
        EXPECT_NEAR(z.value, ramp_zeta_oracle(lambda, y, c), 1e-6);
        EXPECT_LE(z.quad_error, 1e-6);
      }
    }
  }
}

TEST(Zeta, DiscreteModeIsAGeometricSum) {
  QuadraturePolicy q;
  q.mode = TimeMode::discrete;
  const LaplaceFunctional f(0.5, SeparatingFunction::clamped_distance({0.3}), q);
  const auto grid = TimeGrid::from_horizon(1.0, 80.0);
  const auto w = Trajectory::constant(grid, {0.0});
  EXPECT_NEAR(zeta(f, w).value, 0.3 / (1.0 - std::exp(-0.5)), 1e-9);
  // Both sides drop a tail below tail_tol, so agreement is only to that order.
  EXPECT_NEAR(cocycle_defect(f, ramp(grid, 2.0), 3.0), 0.0, 1e-8);
}

TEST(Zeta, SampledPathMustCoverTheQuadratureHorizon) {
  const auto grid = TimeGrid::from_horizon(0.1, 5.0);
  const Trajectory w(grid, std::vector<State>(grid.count(), State{0.0}));
  const LaplaceFunctional f(1.0, SeparatingFunction::clamped_distance({0.5}));
  EXPECT_THROW(zeta(f, w), InsufficientHorizonError);
}

TEST(Cocycle, HoldsOnRampsAndSqrtBranches) {
  const auto grid = TimeGrid::from_horizon(0.01, 8.0);
  const auto fz = signsqrt_funnel(0.0, grid, {0.0, 0.5, kInf}, {Branch::up, Branch::down});
  for (double lambda : {0.25, 1.0}) {
    const LaplaceFunctional f(lambda, SeparatingFunction::clamped_distance({-0.5}));
    for (const auto& w : fz.members) {
      for (double s : {0.5, 1.0, 2.0}) EXPECT_LE(cocycle_defect(f, w, s), 1e-6);
    }
    for (double s : {0.5, 2.0}) EXPECT_LE(cocycle_defect(f, ramp(grid, 1.0), s), 1e-6);
  }
}

TEST(PairOrder, DiagonalVisitsEveryPairOnce) {
  const auto o = PairOrder::diagonal(3, 2);
  const std::vector<std::pair<std::size_t, std::size_t>> expected = {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 0}, {2, 1}};
  EXPECT_EQ(o.pairs(), expected);
  EXPECT_THROW(o.at(6), ExhaustedEnumerationError);
  EXPECT_THROW(PairOrder::explicit_order({{0, 0}, {0, 0}}, 2, 2), ConfigError);
  EXPECT_THROW(PairOrder::explicit_order({{2, 0}}, 2, 2), ConfigError);
}

TEST(Enumeration, DefaultFamilyAndIndexing) {
  const auto e = make_enumeration(default_lambda_grid(), default_phi_family(1));
  EXPECT_EQ(e.size(), 32u);
  const auto f0 = enumerate(e, 0);
  EXPECT_DOUBLE_EQ(f0.lambda(), 0.25);
  EXPECT_EQ(f0.phi().center(), State{0.25});
  EXPECT_EQ(default_phi_family(2).size(), 64u);
  EXPECT_THROW(enumerate(e, 32), ExhaustedEnumerationError);
  EXPECT_THROW(make_enumeration({0.5, -1.0}, default_phi_family(1)), ConfigError);
}
