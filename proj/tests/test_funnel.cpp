#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "semiflow/funnel.hpp"

using namespace semiflow;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST(HeavisideFunnel, MembersPerDelay) {
  const auto grid = TimeGrid::from_horizon(0.01, 8.0);
  const auto cg = default_c_grid(grid);
  EXPECT_EQ(cg.size(), 802u);
  const auto f = heaviside_funnel(0.0, grid, cg);
  EXPECT_EQ(f.size(), cg.size());
  EXPECT_EQ(f.label(f.size() - 1), "v_inf");
  f.validate();
  EXPECT_EQ(heaviside_funnel(0.5, grid, cg).size(), 1u);
  EXPECT_DOUBLE_EQ(heaviside_funnel(0.5, grid, cg).members[0][100][0], 1.5);
  EXPECT_DOUBLE_EQ(heaviside_funnel(-0.5, grid, cg).members[0][800][0], -0.5);
}

TEST(HeavisideFunnel, DelaysMustBeGridAligned) {
  const auto grid = TimeGrid::from_horizon(0.1, 2.0);
  EXPECT_THROW(heaviside_funnel(0.0, grid, {0.05}), AlignmentError);
}

TEST(SignSqrtFunnel, MembersSolveTheOde) {
  const auto grid = TimeGrid::from_horizon(0.001, 3.0);
  const auto f = signsqrt_funnel(0.0, grid, {0.0, 0.5, kInf}, {Branch::up, Branch::down, Branch::stay});
  EXPECT_EQ(f.size(), 5u);
  const auto g = signsqrt_funnel(0.25, grid, {0.0}, {Branch::up});
  std::vector<Trajectory> paths = f.members;
  paths.push_back(g.members[0]);
  paths.push_back(signsqrt_funnel(-1.0, grid, {0.0}, {Branch::up}).members[0]);
  for (const auto& w : paths) {
    for (std::size_t k = 1; k + 1 < grid.count(); k += 7) {
      const double u = w[k][0];
      const double deriv = (w[k + 1][0] - w[k - 1][0]) / (2.0 * grid.dt());
      const double rhs = 2.0 * (u > 0 ? 1.0 : (u < 0 ? -1.0 : 0.0)) * std::sqrt(std::abs(u));
      EXPECT_NEAR(deriv, rhs, 2e-3) << "t = " << grid.time(k);
    }
  }
}

TEST(Closure, ShiftClosedGridsPass) {
  const auto grid = TimeGrid::from_horizon(0.01, 8.0);
  const auto cg = default_c_grid(grid, 0.25);
  const auto h = heaviside_system(grid, cg);
  const auto q = signsqrt_system(grid, cg, {Branch::up, Branch::down, Branch::stay});
  for (const auto* sys : {&h, &q}) {
    for (double x : {-1.0, 0.0, 0.5}) {
      const auto s3 = check_S3(*sys, {x}, {0.0, 0.5, 1.75});
      const auto s4 = check_S4(*sys, {x}, {0.0, 0.5, 1.75});
      EXPECT_TRUE(s3.pass) << sys->name << " " << s3.witness;
      EXPECT_TRUE(s4.pass) << sys->name << " " << s4.witness;
      EXPECT_LE(s4.max_defect, 1e-9);
      EXPECT_GT(s4.checked, 0u);
    }
  }
}

TEST(Closure, MissingShiftIsDetected) {
  const auto grid = TimeGrid::from_horizon(0.1, 4.0);
  const auto sys = heaviside_system(grid, {0.7, kInf});
  const auto s3 = check_S3(sys, {0.0}, {0.5});
  EXPECT_FALSE(s3.pass);
  EXPECT_GT(s3.max_defect, 1e-3);
  EXPECT_NE(s3.witness.find("v_0.7"), std::string::npos) << s3.witness;
  EXPECT_FALSE(check_S4(sys, {0.0}, {0.5}).pass);
}

TEST(Inclusion, SignPairBranchesEnumerateAllSignSequences) {
  const auto grid = TimeGrid::from_horizon(0.5, 1.0);
  const auto f = inclusion_funnel(sign_pair_inclusion(), {0.0}, grid);
  ASSERT_EQ(f.size(), 4u);
  std::set<std::vector<double>> got, expected;
  for (const auto& w : f.members) got.insert({w[0][0], w[1][0], w[2][0]});
  for (int a : {-1, 1}) {
    for (int b : {-1, 1}) expected.insert({0.0, 0.5 * a, 0.5 * (a + b)});
  }
  EXPECT_EQ(got, expected);
}

TEST(Inclusion, PruningMergesCoincidentBranches) {
  const auto grid = TimeGrid::from_horizon(0.25, 2.0);
  InclusionOptions opts;
  opts.max_branches = 5;
  const auto f = inclusion_funnel(sign_pair_inclusion(), {0.0}, grid, opts);
  EXPECT_LE(f.size(), 5u);
  EXPECT_GE(f.size(), 2u);
  opts.hard_cap = 3;
  EXPECT_THROW(inclusion_funnel(sign_pair_inclusion(), {0.0}, grid, opts), ResourceError);
}

TEST(Inclusion, GrowthEnvelopeBoundsEveryState) {
  const auto grid = TimeGrid::from_horizon(0.1, 2.0);
  InclusionRHS F{[](const State& u) {
                   return std::vector<State>{{0.5 * u[0] + 0.5, 0.0}, {0.0, -0.5 * u[1] - 0.5}};
                 },
                 [](double r) { return 0.5 * r + 0.5; }, "linear"};
  InclusionOptions opts;
  opts.max_branches = 32;
  const State x{0.3, -0.4};
  const auto f = inclusion_funnel(F, x, grid, opts);
  const auto psi = growth_envelope(F, x, grid);
  for (const auto& w : f.members) {
    for (std::size_t k = 0; k < grid.count(); ++k) EXPECT_LE(InclusionRHS::norm(w[k]), psi[k] + 1e-12);
  }
}

TEST(Inclusion, FilippovHeavisideContainsRestAndRamp) {
  const auto grid = TimeGrid::from_horizon(0.5, 2.0);
  const auto f = inclusion_funnel(heaviside_inclusion(), {0.0}, grid);
  bool rest = false, ramp = false;
  for (const auto& w : f.members) {
    rest = rest || w.values().back()[0] == 0.0;
    ramp = ramp || std::abs(w.values().back()[0] - 2.0) < 1e-12;
  }
  EXPECT_TRUE(rest);
  EXPECT_TRUE(ramp);
}
