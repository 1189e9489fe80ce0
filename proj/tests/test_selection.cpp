#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "semiflow/experiment.hpp"
#include "semiflow/selection.hpp"

using namespace semiflow;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Argmax chain computed directly from the definition: keep everything within
// eps of the best value, stop at one survivor.
std::size_t brute_force_choice(const Funnel& f, const FunctionalEnumeration& e, std::size_t n_max, double eps) {
  std::vector<std::size_t> alive(f.size());
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;
  for (std::size_t n = 0; n < n_max && alive.size() > 1; ++n) {
    const auto fn = enumerate(e, n);
    std::vector<double> z;
    for (std::size_t i : alive) z.push_back(zeta(fn, f.members[i]).value);
    const double best = *std::max_element(z.begin(), z.end());
    std::vector<std::size_t> next;
    for (std::size_t k = 0; k < alive.size(); ++k) {
      if (z[k] >= best - eps) next.push_back(alive[k]);
    }
    alive = next;
  }
  return alive.front();
}

}  // namespace

TEST(MaximizerSet, HeavisideWorkedExample) {
  const auto grid = TimeGrid::from_horizon(0.01, 8.0);
  const auto f0 = heaviside_funnel(0.0, grid, default_c_grid(grid, 0.25));
  const auto low = maximizer_set(f0, LaplaceFunctional(1.0, SeparatingFunction::clamped_distance({0.25})), 0.0);
  ASSERT_EQ(low.size(), 1u);
  EXPECT_EQ(low.label(0), "v_0");
  const auto high = maximizer_set(f0, LaplaceFunctional(1.0, SeparatingFunction::clamped_distance({0.8})), 0.0);
  ASSERT_EQ(high.size(), 1u);
  EXPECT_EQ(high.label(0), "v_inf");
}

TEST(MaximizerSet, SingletonAndTies) {
  const auto grid = TimeGrid::from_horizon(0.01, 8.0);
  const auto single = heaviside_funnel(1.0, grid, {0.0});
  const LaplaceFunctional f(0.5, SeparatingFunction::clamped_distance({0.25}));
  EXPECT_EQ(maximizer_set(single, f).size(), 1u);
  // Up and down branches tie under a symmetric phi.
  const auto fz = signsqrt_funnel(0.0, grid, {0.0}, {Branch::up, Branch::down});
  const auto tie = maximizer_set(fz, LaplaceFunctional(0.5, SeparatingFunction::clamped_distance({0.0})));
  EXPECT_EQ(tie.size(), 2u);
  EXPECT_EQ(tie.labels, (std::vector<std::string>{"up_0", "down_0"}));
}

TEST(Reduce, AgreesWithBruteForceUnderSeveralOrders) {
  const auto grid = TimeGrid::from_horizon(0.01, 8.0);
  const auto base = make_enumeration(default_lambda_grid(), default_phi_family(1));
  const auto fz = signsqrt_funnel(0.0, grid, default_c_grid(grid, 0.5), {Branch::up, Branch::down, Branch::stay});
  for (auto [i, j] : std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {3, 1}, {1, 6}, {2, 7}}) {
    const auto e = enumeration_starting_with(base, i, j);
    const auto r = reduce(fz, e, {1e-9, 1e-9, 16});
    EXPECT_EQ(r.trace.chosen, brute_force_choice(fz, e, 16, 1e-9)) << i << "," << j;
    EXPECT_TRUE(r.trace.singleton);
    for (std::size_t k = 1; k < r.trace.steps.size(); ++k) {
      const auto& prev = r.trace.steps[k - 1].survivors;
      for (std::size_t s : r.trace.steps[k].survivors) {
        EXPECT_NE(std::find(prev.begin(), prev.end(), s), prev.end());
      }
    }
  }
}

TEST(Reduce, FlagsNonSingletonAndBreaksTiesByIndex) {
  const auto grid = TimeGrid::from_horizon(0.01, 8.0);
  const auto fz = signsqrt_funnel(0.0, grid, {0.0}, {Branch::up, Branch::down});
  FunctionalEnumeration e = make_enumeration({0.5}, {SeparatingFunction::clamped_distance({0.0})});
  const auto r = reduce(fz, e, {1e-9, 1e-9, 1});
  EXPECT_FALSE(r.trace.singleton);
  EXPECT_EQ(r.trace.chosen, 0u);
  EXPECT_THROW(reduce(fz, e, {1e-9, 1e-9, 2}), PreconditionError);
}

TEST(Semigroup, HoldsForBothSystems) {
  const auto grid = TimeGrid::from_horizon(0.01, 8.0);
  const auto cg = default_c_grid(grid, 0.5);
  const auto e = make_enumeration(default_lambda_grid(), default_phi_family(1));
  const std::vector<State> initials = {{-1.0}, {-0.5}, {0.0}, {0.5}, {1.0}};
  const std::vector<double> ts = {0.0, 0.5, 1.0, 2.0};
  for (const auto& sys : {heaviside_system(grid, cg), signsqrt_system(grid, cg, {Branch::up, Branch::down, Branch::stay})}) {
    const auto sel = select_semiflow(sys, initials, e, {1e-9, 1e-9, 16});
    for (const auto& entry : sel.entries) EXPECT_EQ(entry.path[0], entry.initial);
    const auto rep = verify_semigroup(sel, sys, ts, ts, 1e-9);
    EXPECT_TRUE(rep.pass) << sys.name << " defect " << rep.max_defect;
    EXPECT_EQ(rep.checked, initials.size() * ts.size() * ts.size());
  }
}

TEST(Semigroup, ViolatedByAnInconsistentChoice) {
  // Picking v_1 at 0 is not time-consistent: u(0.5, 0) = 0 again, so
  // u(1, u(0.5, 0)) = v_1(1) = 0 while u(1.5, 0) = 0.5.
  const auto grid = TimeGrid::from_horizon(0.01, 8.0);
  const auto sys = heaviside_system(grid, {1.0, kInf});
  const auto e = make_enumeration({1.0}, {SeparatingFunction::clamped_distance({-0.25})});
  auto sel = select_semiflow(sys, {{0.0}}, e, {1e-9, 1e-9, 1});
  ASSERT_EQ(sel.entries[0].label, "v_1");
  const auto rep = verify_semigroup(sel, sys, {0.5}, {1.0}, 1e-9);
  EXPECT_FALSE(rep.pass);
  EXPECT_NEAR(rep.max_defect, 0.5, 1e-12);
}
