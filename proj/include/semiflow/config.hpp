#pragma once

// Experiment configuration: strict JSON schema with defaults, canonical
// serialization and a content hash.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/error.hpp"
#include "semiflow/functionals.hpp"
#include "semiflow/funnel.hpp"
#include "semiflow/io.hpp"
#include "semiflow/markov/krylov.hpp"

namespace semiflow {

enum class SystemKind { heaviside, signsqrt, inclusion, markov };

inline std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::heaviside: return "heaviside";
    case SystemKind::signsqrt: return "signsqrt";
    case SystemKind::inclusion: return "inclusion";
    case SystemKind::markov: return "markov";
  }
  return "unknown";
}

struct EnumerationConfig {
  std::vector<double> lambda_grid = default_lambda_grid();
  /// Centers y of clamped distances; empty selects the default family.
  std::vector<State> phi_centers;
  /// Explicit (lambda index, phi index) order; empty means anti-diagonal.
  std::vector<std::pair<std::size_t, std::size_t>> order;
};

struct ToleranceConfig {
  double eps = 1e-9;
  double singleton_tol = 1e-9;
  double semigroup_tol = 1e-9;
  double closure_tol = 1e-9;
  double cocycle_tol = 1e-6;
  double markov_tol = 1e-9;
  double face_tol = 1e-10;
};

struct InclusionConfig {
  /// JSON file describing the right-hand side, relative to the config file.
  std::string file;
  std::size_t max_branches = 64;
  double prune_tol = 1e-9;
  std::size_t hard_cap = std::size_t{1} << 20;
};

struct MarkovConfig {
  /// Instance file; when empty, `instances` random chains are drawn from the seed.
  std::string file;
  std::size_t instances = 50;
  int m_max = 3;
  int N_max = 3;
  std::size_t actions_max = 2;
  std::size_t commute_checks = 100;
  std::size_t battery = 100;
  std::size_t strassen_cases = 20;
  std::size_t kp_measures = 16;
  std::size_t kp_samples = 3;
  /// Repeat the selection in rational arithmetic where m (N + 1) <= 12.
  bool exact = false;
  std::vector<double> lambda_grid = default_lambda_grid();
};

struct ExperimentConfig {
  SystemKind system = SystemKind::heaviside;
  double dt = 0.01;
  double horizon = 8.0;
  /// Spacing of the finite delays; 0 means dt.
  double c_step = 0.0;
  std::vector<std::string> branches = {"up", "down", "stay"};
  std::vector<State> initials = {{0.0}};
  EnumerationConfig enumeration;
  QuadraturePolicy quadrature;
  ToleranceConfig tolerances;
  std::size_t n_max = 16;
  std::vector<double> t1 = {0.0, 0.5, 1.0, 2.0};
  std::vector<double> t2 = {0.0, 0.5, 1.0, 2.0};
  std::vector<double> closure_s = {0.5, 1.0, 2.0};
  InclusionConfig inclusion;
  MarkovConfig markov;
  std::uint64_t seed = 0;
  /// Directory against which relative file references resolve; not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& file) const {
    const std::filesystem::path p(file);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }
};

namespace detail {

inline void reject_unknown(const io::json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw ConfigError("unknown key \"" + k + "\" in " + where);
  }
}

template <class V>
void read_into(const io::json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const io::json::exception& e) {
    throw ConfigError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

inline void require_positive(double v, const std::string& name) {
  if (!(v > 0.0)) throw ConfigError(name + " must be positive");
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  detail::require_positive(c.dt, "grid.dt");
  detail::require_positive(c.horizon, "grid.horizon");
  if (c.c_step < 0.0) throw ConfigError("c_step must be non-negative");
  const auto& t = c.tolerances;
  const std::initializer_list<std::pair<double, const char*>> tols = {
      {t.eps, "eps"},           {t.singleton_tol, "singleton_tol"}, {t.semigroup_tol, "semigroup_tol"},
      {t.closure_tol, "closure_tol"}, {t.cocycle_tol, "cocycle_tol"},   {t.markov_tol, "markov_tol"},
      {t.face_tol, "face_tol"}};
  for (auto [v, n] : tols) {
    detail::require_positive(v, std::string("tolerances.") + n);
  }
  detail::require_positive(c.quadrature.quad_dt, "quadrature.quad_dt");
  detail::require_positive(c.quadrature.tail_tol, "quadrature.tail_tol");
  if (c.initials.empty()) throw ConfigError("initials must not be empty");
  for (const auto& x : c.initials) {
    if (x.empty() || x.size() != c.initials.front().size()) throw ConfigError("initials must share a positive dimension");
  }
  for (const auto& b : c.branches) {
    if (b != "up" && b != "down" && b != "stay") throw ConfigError("unknown branch \"" + b + "\"");
  }
  for (double l : c.enumeration.lambda_grid) detail::require_positive(l, "enumeration.lambda_grid entries");
  for (double l : c.markov.lambda_grid) detail::require_positive(l, "markov.lambda_grid entries");
  if (c.n_max == 0) throw ConfigError("n_max must be at least 1");
  if (c.system == SystemKind::inclusion) {
    if (c.inclusion.file.empty()) throw ConfigError("system \"inclusion\" needs inclusion.file");
    if (!std::filesystem::exists(c.resolve(c.inclusion.file))) {
      throw IoError("inclusion file not found: " + c.resolve(c.inclusion.file).string());
    }
  }
  if (!c.markov.file.empty() && !std::filesystem::exists(c.resolve(c.markov.file))) {
    throw IoError("Markov instance file not found: " + c.resolve(c.markov.file).string());
  }
  if (c.markov.m_max < 2 || c.markov.N_max < 1 || c.markov.actions_max < 1) {
    throw ConfigError("markov bounds need m_max >= 2, N_max >= 1, actions_max >= 1");
  }
}

inline io::json config_to_json(const ExperimentConfig& c) {
  using io::json;
  json phi = json::array();
  for (const auto& y : c.enumeration.phi_centers) phi.push_back({{"kind", "clamped_distance"}, {"y", y}});
  json order = c.enumeration.order.empty() ? json("diagonal") : json(c.enumeration.order);
  return {
      {"system", to_string(c.system)},
      {"grid", {{"dt", c.dt}, {"horizon", c.horizon}}},
      {"c_step", c.c_step},
      {"branches", c.branches},
      {"initials", c.initials},
      {"enumeration", {{"lambda_grid", c.enumeration.lambda_grid}, {"phi", phi}, {"order", order}}},
      {"quadrature",
       {{"quad_dt", c.quadrature.quad_dt},
        {"tail_tol", c.quadrature.tail_tol},
        {"discrete", c.quadrature.mode == TimeMode::discrete}}},
      {"tolerances",
       {{"eps", c.tolerances.eps},
        {"singleton_tol", c.tolerances.singleton_tol},
        {"semigroup_tol", c.tolerances.semigroup_tol},
        {"closure_tol", c.tolerances.closure_tol},
        {"cocycle_tol", c.tolerances.cocycle_tol},
        {"markov_tol", c.tolerances.markov_tol},
        {"face_tol", c.tolerances.face_tol}}},
      {"n_max", c.n_max},
      {"t1", c.t1},
      {"t2", c.t2},
      {"closure_s", c.closure_s},
      {"inclusion",
       {{"file", c.inclusion.file},
        {"max_branches", c.inclusion.max_branches},
        {"prune_tol", c.inclusion.prune_tol},
        {"hard_cap", c.inclusion.hard_cap}}},
      {"markov",
       {{"file", c.markov.file},
        {"instances", c.markov.instances},
        {"m_max", c.markov.m_max},
        {"N_max", c.markov.N_max},
        {"actions_max", c.markov.actions_max},
        {"commute_checks", c.markov.commute_checks},
        {"battery", c.markov.battery},
        {"strassen_cases", c.markov.strassen_cases},
        {"kp_measures", c.markov.kp_measures},
        {"kp_samples", c.markov.kp_samples},
        {"exact", c.markov.exact},
        {"lambda_grid", c.markov.lambda_grid}}},
      {"seed", c.seed},
  };
}

inline ExperimentConfig config_from_json(const io::json& j, std::filesystem::path base_dir = {}) {
  using detail::read_into;
  ExperimentConfig c;
  c.base_dir = std::move(base_dir);
  detail::reject_unknown(j,
                         {"system", "grid", "c_step", "branches", "initials", "enumeration", "quadrature", "tolerances",
                          "n_max", "t1", "t2", "closure_s", "inclusion", "markov", "seed"},
                         "config");
  if (j.contains("system")) {
    const auto s = j.at("system").get<std::string>();
    if (s == "heaviside") c.system = SystemKind::heaviside;
    else if (s == "signsqrt") c.system = SystemKind::signsqrt;
    else if (s == "inclusion") c.system = SystemKind::inclusion;
    else if (s == "markov") c.system = SystemKind::markov;
    else throw ConfigError("unknown system \"" + s + "\"");
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::reject_unknown(g, {"dt", "horizon"}, "grid");
    read_into(g, "dt", c.dt);
    read_into(g, "horizon", c.horizon);
  }
  read_into(j, "c_step", c.c_step);
  read_into(j, "branches", c.branches);
  read_into(j, "initials", c.initials);
  if (j.contains("enumeration")) {
    const auto& e = j.at("enumeration");
    detail::reject_unknown(e, {"lambda_grid", "phi", "order"}, "enumeration");
    read_into(e, "lambda_grid", c.enumeration.lambda_grid);
    if (e.contains("phi")) {
      for (const auto& p : e.at("phi")) {
        detail::reject_unknown(p, {"kind", "y"}, "enumeration.phi entry");
        if (p.value("kind", std::string("clamped_distance")) != "clamped_distance") {
          throw ConfigError("only clamped_distance phi entries can be configured");
        }
        c.enumeration.phi_centers.push_back(p.at("y").get<State>());
      }
    }
    if (e.contains("order") && !(e.at("order").is_string() && e.at("order").get<std::string>() == "diagonal")) {
      read_into(e, "order", c.enumeration.order);
    }
  }
  if (j.contains("quadrature")) {
    const auto& q = j.at("quadrature");
    detail::reject_unknown(q, {"quad_dt", "tail_tol", "discrete"}, "quadrature");
    read_into(q, "quad_dt", c.quadrature.quad_dt);
    read_into(q, "tail_tol", c.quadrature.tail_tol);
    bool discrete = false;
    read_into(q, "discrete", discrete);
    c.quadrature.mode = discrete ? TimeMode::discrete : TimeMode::continuous;
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    detail::reject_unknown(t,
                           {"eps", "singleton_tol", "semigroup_tol", "closure_tol", "cocycle_tol", "markov_tol",
                            "face_tol"},
                           "tolerances");
    read_into(t, "eps", c.tolerances.eps);
    read_into(t, "singleton_tol", c.tolerances.singleton_tol);
    read_into(t, "semigroup_tol", c.tolerances.semigroup_tol);
    read_into(t, "closure_tol", c.tolerances.closure_tol);
    read_into(t, "cocycle_tol", c.tolerances.cocycle_tol);
    read_into(t, "markov_tol", c.tolerances.markov_tol);
    read_into(t, "face_tol", c.tolerances.face_tol);
  }
  read_into(j, "n_max", c.n_max);
  read_into(j, "t1", c.t1);
  read_into(j, "t2", c.t2);
  read_into(j, "closure_s", c.closure_s);
  if (j.contains("inclusion")) {
    const auto& i = j.at("inclusion");
    detail::reject_unknown(i, {"file", "max_branches", "prune_tol", "hard_cap"}, "inclusion");
    read_into(i, "file", c.inclusion.file);
    read_into(i, "max_branches", c.inclusion.max_branches);
    read_into(i, "prune_tol", c.inclusion.prune_tol);
    read_into(i, "hard_cap", c.inclusion.hard_cap);
  }
  if (j.contains("markov")) {
    const auto& m = j.at("markov");
    detail::reject_unknown(m,
                           {"file", "instances", "m_max", "N_max", "actions_max", "commute_checks", "battery",
                            "strassen_cases", "kp_measures", "kp_samples", "exact", "lambda_grid"},
                           "markov");
    read_into(m, "file", c.markov.file);
    read_into(m, "instances", c.markov.instances);
    read_into(m, "m_max", c.markov.m_max);
    read_into(m, "N_max", c.markov.N_max);
    read_into(m, "actions_max", c.markov.actions_max);
    read_into(m, "commute_checks", c.markov.commute_checks);
    read_into(m, "battery", c.markov.battery);
    read_into(m, "strassen_cases", c.markov.strassen_cases);
    read_into(m, "kp_measures", c.markov.kp_measures);
    read_into(m, "kp_samples", c.markov.kp_samples);
    read_into(m, "exact", c.markov.exact);
    read_into(m, "lambda_grid", c.markov.lambda_grid);
  }
  read_into(j, "seed", c.seed);
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(io::read_json_file(path), path.parent_path());
}

/// Hash of the canonical serialization (seed included).
inline std::string config_hash(const ExperimentConfig& c) { return io::fnv1a_hex(config_to_json(c).dump()); }

// ---- builders -------------------------------------------------------------

inline TimeGrid make_grid(const ExperimentConfig& c) { return TimeGrid::from_horizon(c.dt, c.horizon); }

inline std::vector<Branch> parse_branches(const std::vector<std::string>& names) {
  std::vector<Branch> out;
  for (const auto& b : names) {
    if (b == "up") out.push_back(Branch::up);
    else if (b == "down") out.push_back(Branch::down);
    else if (b == "stay") out.push_back(Branch::stay);
    else throw ConfigError("unknown branch \"" + b + "\"");
  }
  return out;
}

/// Inclusion file: {"name": ..., "dim": d, "growth": g (optional),
/// "rules": [{"lower": [...], "upper": [...], "velocities": [[...], ...]}]}.
/// The first rule whose closed box contains u supplies F(u); bounds may be "inf".
namespace detail {

inline InclusionRHS inclusion_from_json_unchecked(const io::json& j) {
  detail::reject_unknown(j, {"name", "dim", "growth", "rules"}, "inclusion file");
  struct Rule {
    std::vector<double> lower, upper;
    std::vector<State> velocities;
  };
  std::vector<Rule> rules;
  const auto dim = j.at("dim").get<std::size_t>();
  if (dim == 0) throw ConfigError("inclusion dim must be positive");
  double max_norm = 0.0;
  for (const auto& r : j.at("rules")) {
    detail::reject_unknown(r, {"lower", "upper", "velocities"}, "inclusion rule");
    Rule rule;
    for (const auto& v : r.at("lower")) rule.lower.push_back(io::read_extended(v));
    for (const auto& v : r.at("upper")) rule.upper.push_back(io::read_extended(v));
    rule.velocities = r.at("velocities").get<std::vector<State>>();
    if (rule.lower.size() != dim || rule.upper.size() != dim) throw ConfigError("inclusion rule bounds of wrong dimension");
    if (rule.velocities.empty()) throw ConfigError("inclusion rule without velocities");
    for (const auto& v : rule.velocities) {
      if (v.size() != dim) throw ConfigError("inclusion velocity of wrong dimension");
      max_norm = std::max(max_norm, InclusionRHS::norm(v));
    }
    rules.push_back(std::move(rule));
  }
  const double growth = j.contains("growth") ? j.at("growth").get<double>() : std::max(max_norm, 1e-300);
  if (growth < max_norm) throw ConfigError("declared growth bound is below a velocity norm");
  return {[rules](const State& u) {
            for (const auto& r : rules) {
              bool inside = true;
              for (std::size_t i = 0; i < u.size() && inside; ++i) inside = r.lower[i] <= u[i] && u[i] <= r.upper[i];
              if (inside) return r.velocities;
            }
            throw DomainError("no inclusion rule covers " + semiflow::detail::format_state(u));
          },
          [growth](double) { return growth; }, j.value("name", std::string("inclusion"))};
}

}  // namespace detail

inline InclusionRHS inclusion_from_json(const io::json& j) {
  try {
    return detail::inclusion_from_json_unchecked(j);
  } catch (const io::json::exception& e) {
    throw ConfigError(std::string("malformed inclusion file: ") + e.what());
  }
}

inline FunnelSystem make_system(const ExperimentConfig& c) {
  const TimeGrid grid = make_grid(c);
  switch (c.system) {
    case SystemKind::heaviside:
      return heaviside_system(grid, default_c_grid(grid, c.c_step), c.tolerances.closure_tol);
    case SystemKind::signsqrt:
      return signsqrt_system(grid, default_c_grid(grid, c.c_step), parse_branches(c.branches),
                             c.tolerances.closure_tol);
    case SystemKind::inclusion: {
      InclusionOptions opts{c.inclusion.max_branches, c.inclusion.prune_tol, c.inclusion.hard_cap};
      return inclusion_system(inclusion_from_json(io::read_json_file(c.resolve(c.inclusion.file))), grid, opts,
                              c.tolerances.closure_tol);
    }
    case SystemKind::markov: break;
  }
  throw ConfigError("system \"markov\" has no funnel; use the markov command");
}

inline FunctionalEnumeration enumeration_for(const ExperimentConfig& c) {
  std::vector<SeparatingFunction> phis;
  if (c.enumeration.phi_centers.empty()) {
    phis = default_phi_family(c.initials.front().size());
  } else {
    for (const auto& y : c.enumeration.phi_centers) {
      if (y.size() != c.initials.front().size()) throw ConfigError("phi center dimension differs from the state");
      phis.push_back(SeparatingFunction::clamped_distance(y));
    }
  }
  FunctionalEnumeration e = make_enumeration(c.enumeration.lambda_grid, std::move(phis), c.quadrature);
  if (!c.enumeration.order.empty()) {
    e.order = PairOrder::explicit_order(c.enumeration.order, e.lambda_grid.size(), e.phi_list.size());
  }
  return e;
}

inline SelectionOptions make_selection_options(const ExperimentConfig& c) {
  return {c.tolerances.eps, c.tolerances.singleton_tol, c.n_max};
}

}  // namespace semiflow
