// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Usage: acceptance [scratch directory]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "semiflow/semiflow.hpp"

using namespace semiflow;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(int id, const std::string& name, double time_limit, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < time_limit;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s criterion %d %s: %s; %.2f s (limit %.0f s)%s\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.c_str(), secs, time_limit, in_time ? "" : " TIMEOUT");
  std::fflush(stdout);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Independent value of zeta for the delayed ramp: Gauss-Kronrod on the
// smooth pieces plus the exact exponential tail.
double ramp_zeta_oracle(double lambda, double y, double c) {
  using boost::math::quadrature::gauss_kronrod;
  if (std::isinf(c)) return y / lambda;
  auto g = [&](double t) { return std::exp(-lambda * t) * std::min(std::abs(std::max(t - c, 0.0) - y), 1.0); };
  const double knots[] = {0.0, c, c + y, c + y + 1.0};
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (knots[i + 1] > knots[i]) acc += gauss_kronrod<double, 31>::integrate(g, knots[i], knots[i + 1], 10, 1e-14);
  }
  return acc + std::exp(-lambda * (c + y + 1.0)) / lambda;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every file under a and b, compared byte for byte.
Outcome same_files(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  std::size_t nb = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++nb;
  if (names.empty() || nb != names.size()) return {false, "file sets differ"};
  for (const auto& n : names) {
    if (slurp(a / n) != slurp(b / n)) return {false, n + " differs"};
  }
  return {true, std::to_string(names.size()) + " files identical"};
}

const std::vector<State> kInitials = {{-1.0}, {-0.5}, {0.0}, {0.5}, {1.0}};

}  // namespace

int main(int argc, char** argv) {
  const fs::path scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "semiflow_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  const TimeGrid grid = TimeGrid::from_horizon(0.01, 8.0);

  run(1, "threshold root", 1.0, [] {
    const double y = threshold_root(1.0);
    const double oracle = std::log(2.0 * std::exp(1.0) - 1.0) - 1.0;
    const double err = std::abs(y - 0.489);
    return Outcome{err <= 1e-3 && std::abs(y - oracle) <= 1e-12,
                   "y* = " + fmt(y) + ", |y* - 0.489| = " + fmt(err)};
  });

  run(2, "zeta table", 5.0, [&] {
    QuadraturePolicy quad;
    quad.quad_dt = 1e-3;
    quad.tail_tol = 1e-9;
    double worst = 0.0;
    std::size_t cells = 0;
    for (double lambda : {0.5, 1.0}) {
      for (double y : {0.25, 0.8}) {
        const LaplaceFunctional f(lambda, SeparatingFunction::clamped_distance({y}), quad);
        for (double c : {0.0, 0.5, 1.0, kInf}) {
          const double z = zeta(f, heaviside_funnel(0.0, grid, {c}).members.front()).value;
          worst = std::max(worst, std::abs(z - ramp_zeta_oracle(lambda, y, c)));
          ++cells;
        }
      }
    }
    return Outcome{cells == 16 && worst <= 1e-6, std::to_string(cells) + " cells, max error " + fmt(worst)};
  });

  run(3, "ordering dependence", 60.0, [&] {
    const Funnel f0 = heaviside_funnel(0.0, grid, default_c_grid(grid));
    const auto base = make_enumeration(default_lambda_grid(), default_phi_family(1));
    const auto a = enumeration_starting_with(base, index_of(base.lambda_grid, 0.5), phi_index(base.phi_list, 0.25));
    const auto b = enumeration_starting_with(base, index_of(base.lambda_grid, 1.0), phi_index(base.phi_list, 0.8));
    const SelectionOptions opts{1e-9, 1e-9, 16};
    const auto ra = reduce(f0, a, opts);
    const auto rb = reduce(f0, b, opts);
    const bool ok = ra.label == "v_0" && rb.label == "v_inf" && ra.trace.chosen != rb.trace.chosen;
    return Outcome{ok, "order A -> " + ra.label + ", order B -> " + rb.label};
  });

  run(4, "semigroup", 10.0, [&] {
    const auto cg = default_c_grid(grid);
    const auto e = make_enumeration(default_lambda_grid(), default_phi_family(1));
    const std::vector<double> ts = {0.0, 0.5, 1.0, 2.0};
    double worst = 0.0;
    std::size_t checked = 0;
    bool ok = true;
    for (const auto& sys : {heaviside_system(grid, cg), signsqrt_system(grid, cg, {Branch::up, Branch::down, Branch::stay})}) {
      const auto sel = select_semiflow(sys, kInitials, e, {1e-9, 1e-9, 16});
      const auto rep = verify_semigroup(sel, sys, ts, ts, 1e-9);
      ok = ok && rep.pass && rep.max_defect <= 1e-9;
      worst = std::max(worst, rep.max_defect);
      checked += rep.checked;
    }
    return Outcome{ok && checked == 160, std::to_string(checked) + " cases, max defect " + fmt(worst)};
  });

  run(5, "cocycle", 5.0, [&] {
    const auto cg = default_c_grid(grid, 0.5);
    const auto e = make_enumeration(default_lambda_grid(), default_phi_family(1));
    double worst = 0.0;
    std::size_t cases = 0;
    for (const auto& sys : {heaviside_system(grid, cg), signsqrt_system(grid, cg, {Branch::up, Branch::down, Branch::stay})}) {
      const auto [d, n] = cocycle_battery(sys, kInitials, e, {0.5, 1.0, 2.0});
      worst = std::max(worst, d);
      cases += n;
    }
    return Outcome{cases >= 50 && worst <= 1e-6, std::to_string(cases) + " cases, max defect " + fmt(worst)};
  });

  run(6, "shift and splice closure", 120.0, [&] {
    const auto cg = default_c_grid(grid, 0.1);
    double worst = 0.0;
    std::size_t checked = 0;
    bool ok = true;
    for (const auto& sys : {heaviside_system(grid, cg), signsqrt_system(grid, cg, {Branch::up, Branch::down, Branch::stay})}) {
      for (const auto& x : kInitials) {
        const auto s3 = check_S3(sys, x, {0.5, 1.0, 2.0});
        const auto s4 = check_S4(sys, x, {0.5, 1.0, 2.0});
        ok = ok && s3.pass && s4.pass && s3.max_defect <= 1e-9 && s4.max_defect <= 1e-9;
        worst = std::max({worst, s3.max_defect, s4.max_defect});
        checked += s3.checked + s4.checked;
      }
    }
    return Outcome{ok && checked > 0, std::to_string(checked) + " cases, max defect " + fmt(worst)};
  });

  run(7, "Markov suite", 60.0, [&] {
    ExperimentConfig cfg;
    cfg.system = SystemKind::markov;
    cfg.markov.instances = 50;
    cfg.markov.commute_checks = 100;
    const auto rep = cmd_markov(cfg, scratch / "markov7");
    std::string detail;
    bool ok = true;
    for (const char* name : {"markov_property", "commute", "kp1", "kp2"}) {
      bool found = false;
      for (const auto& c : rep.checks) {
        if (c.name != name) continue;
        found = true;
        ok = ok && c.pass && c.defect <= 1e-9;
        detail += std::string(detail.empty() ? "" : ", ") + name + " " + fmt(c.defect);
      }
      ok = ok && found;
    }
    return Outcome{ok, detail};
  });

  run(8, "Strassen disintegration", 60.0, [&] {
    using namespace markov;
    std::mt19937_64 rng(8);
    double feas_worst = 0.0, margin_min = kInf;
    int feas_ok = 0, infeas_ok = 0;
    for (int k = 0; k < 20; ++k) {
      const auto chain = random_chain(rng);
      const auto K = generate_krylov_map(chain);
      const int x = static_cast<int>(rng() % static_cast<unsigned>(chain.m));
      const auto P = random_member(rng, K.at(x));
      const int s = 1 + static_cast<int>(rng() % static_cast<unsigned>(chain.N));
      const auto& layer = K.sets.at(static_cast<std::size_t>(chain.N - s));
      const auto masses = P.prefix_masses(s);

      // Feasible: rebuild Q from the returned kernel by hand.
      const auto member = random_K_member(rng, P, s, K.sets);
      const auto ok = strassen_disintegrate(member.Q, P, s, K.sets);
      if (ok.feasible) {
        std::vector<double> rebuilt(member.Q.probs.size(), 0.0);
        double worst = 0.0;
        for (std::size_t p = 0; p < masses.size(); ++p) {
          if (!(masses[p] > 0.0)) continue;
          const auto it = ok.kernel.kernels.find(p);
          if (it == ok.kernel.kernels.end()) {
            worst = 1.0;
            continue;
          }
          for (std::size_t v = 0; v < rebuilt.size(); ++v) rebuilt[v] += masses[p] * it->second.probs[v];
          // Each kernel must lie under the support function of its endpoint set.
          const auto& C = layer.at(static_cast<std::size_t>(P.space.prefix_end(p)));
          for (const auto& f : functional_battery(rebuilt.size(), 8, rng())) {
            double q = 0.0, h = -kInf;
            for (std::size_t v = 0; v < f.size(); ++v) q += f[v] * it->second.probs[v];
            for (const auto& vert : C.vertices) {
              double a = 0.0;
              for (std::size_t v = 0; v < f.size(); ++v) a += f[v] * vert[v];
              h = std::max(h, a);
            }
            worst = std::max(worst, q - h);
          }
        }
        for (std::size_t v = 0; v < rebuilt.size(); ++v) worst = std::max(worst, std::abs(rebuilt[v] - member.Q.probs[v]));
        feas_worst = std::max(feas_worst, worst);
        if (worst <= 1e-9) ++feas_ok;
      } else {
        feas_worst = std::max(feas_worst, 1.0);
      }

      // Infeasible: recompute Qf and the integrated support by hand.
      const auto bad = violating_measure(rng, P, s, K.sets);
      const auto no = strassen_disintegrate(bad.Q, P, s, K.sets);
      if (!no.feasible && !no.witness.empty()) {
        double qf = 0.0, hp = 0.0;
        for (std::size_t v = 0; v < no.witness.size(); ++v) qf += no.witness[v] * bad.Q.probs[v];
        for (std::size_t p = 0; p < masses.size(); ++p) {
          if (!(masses[p] > 0.0)) continue;
          double h = -kInf;
          for (const auto& vert : layer.at(static_cast<std::size_t>(P.space.prefix_end(p))).vertices) {
            double a = 0.0;
            for (std::size_t v = 0; v < vert.size(); ++v) a += no.witness[v] * vert[v];
            h = std::max(h, a);
          }
          hp += masses[p] * h;
        }
        margin_min = std::min(margin_min, qf - hp);
        if (qf > hp + 1e-9) ++infeas_ok;
      } else {
        margin_min = std::min(margin_min, 0.0);
      }
    }
    return Outcome{feas_ok == 20 && infeas_ok == 20,
                   std::to_string(feas_ok) + "/20 rebuilt (worst " + fmt(feas_worst) + "), " +
                       std::to_string(infeas_ok) + "/20 separated (min margin " + fmt(margin_min) + ")"};
  });

  run(9, "determinism", 120.0, [&] {
    ExperimentConfig sel_cfg;
    sel_cfg.initials = kInitials;
    sel_cfg.c_step = 0.5;
    ExperimentConfig mk_cfg;
    mk_cfg.system = SystemKind::markov;
    mk_cfg.markov.instances = 10;
    mk_cfg.seed = 7;
    for (const char* run_dir : {"run1", "run2"}) {
      cmd_select(sel_cfg, scratch / run_dir / "select");
      cmd_markov(mk_cfg, scratch / run_dir / "markov");
    }
    const auto a = same_files(scratch / "run1" / "select", scratch / "run2" / "select");
    const auto b = same_files(scratch / "run1" / "markov", scratch / "run2" / "markov");
    return Outcome{a.pass && b.pass, "select: " + a.detail + "; markov: " + b.detail};
  });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
