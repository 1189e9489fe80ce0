#pragma once

// JSON and CSV formats for trajectories, funnels, selections and controlled
// chains. Doubles are written in shortest round-trip form, so load(save(x))
// reproduces x bit for bit. Infinite delays are written as the string "inf".

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "semiflow/error.hpp"
#include "semiflow/funnel.hpp"
#include "semiflow/markov/krylov.hpp"
#include "semiflow/path_space.hpp"
#include "semiflow/selection.hpp"

namespace semiflow::io {

using json = nlohmann::json;

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// A number, or one of the strings "inf" / "-inf".
inline json extended_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double read_extended(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("expected a number or \"inf\", got \"" + s + "\"");
  }
  if (!j.is_number()) throw ConfigError("expected a number, got " + j.dump());
  return j.get<double>();
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// ---- trajectories -------------------------------------------------------

inline json closed_form_to_json(const ClosedForm& cf) {
  json comps = json::array();
  for (const auto& c : cf.components) {
    json pieces = json::array();
    for (const auto& p : c.pieces()) pieces.push_back({{"start", p.start}, {"coeffs", p.coeffs}});
    comps.push_back(std::move(pieces));
  }
  return comps;
}

inline ClosedForm closed_form_from_json(const json& j) {
  ClosedForm cf;
  for (const auto& comp : j) {
    std::vector<PolynomialPiece> pieces;
    for (const auto& p : comp) pieces.push_back({p.at("start").get<double>(), p.at("coeffs").get<std::vector<double>>()});
    cf.components.emplace_back(std::move(pieces));
  }
  return cf;
}

inline json trajectory_to_json(const Trajectory& w) {
  json j{{"dt", w.grid().dt()}, {"count", w.grid().count()}, {"values", w.values()}};
  j["closed_form"] = w.closed_form() ? closed_form_to_json(*w.closed_form()) : json(nullptr);
  return j;
}

inline Trajectory trajectory_from_json(const json& j) {
  try {
    const TimeGrid grid(j.at("dt").get<double>(), j.at("count").get<std::size_t>());
    auto values = j.at("values").get<std::vector<State>>();
    std::optional<ClosedForm> cf;
    if (j.contains("closed_form") && !j.at("closed_form").is_null()) cf = closed_form_from_json(j.at("closed_form"));
    return Trajectory(grid, std::move(values), std::move(cf));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed trajectory: ") + e.what());
  }
}

/// Columns t, x1, ..., xd.
inline std::string trajectory_csv(const Trajectory& w) {
  std::ostringstream os;
  os << "t";
  for (std::size_t i = 0; i < w.dim(); ++i) os << ",x" << i + 1;
  os << "\n";
  for (std::size_t k = 0; k < w.grid().count(); ++k) {
    os << format_double(w.grid().time(k));
    for (double v : w[k]) os << "," << format_double(v);
    os << "\n";
  }
  return os.str();
}

// ---- funnels ------------------------------------------------------------

inline json funnel_to_json(const Funnel& f) {
  json members = json::array();
  for (std::size_t i = 0; i < f.size(); ++i) {
    members.push_back({{"label", f.label(i)}, {"path", trajectory_to_json(f.members[i])}});
  }
  return {{"initial", f.initial}, {"members", std::move(members)}};
}

inline Funnel funnel_from_json(const json& j) {
  Funnel f;
  try {
    f.initial = j.at("initial").get<State>();
    for (const auto& m : j.at("members")) {
      f.labels.push_back(m.at("label").get<std::string>());
      f.members.push_back(trajectory_from_json(m.at("path")));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed funnel: ") + e.what());
  }
  return f;
}

/// Long format: member, label, t, x1, ..., xd.
inline std::string funnel_csv(const Funnel& f) {
  std::ostringstream os;
  const std::size_t d = f.members.empty() ? f.initial.size() : f.members.front().dim();
  os << "member,label,t";
  for (std::size_t i = 0; i < d; ++i) os << ",x" << i + 1;
  os << "\n";
  for (std::size_t m = 0; m < f.size(); ++m) {
    const auto& w = f.members[m];
    for (std::size_t k = 0; k < w.grid().count(); ++k) {
      os << m << "," << f.label(m) << "," << format_double(w.grid().time(k));
      for (double v : w[k]) os << "," << format_double(v);
      os << "\n";
    }
  }
  return os.str();
}

// ---- selections ---------------------------------------------------------

inline json trace_to_json(const ReductionTrace& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"functional_index", s.functional_index},
                     {"lambda", s.lambda},
                     {"phi", s.phi},
                     {"survivors", s.survivors},
                     {"max_value", s.max_value},
                     {"spread", s.spread}});
  }
  return {{"singleton", t.singleton}, {"chosen", t.chosen}, {"steps", std::move(steps)}};
}

inline ReductionTrace trace_from_json(const json& j) {
  ReductionTrace t;
  t.singleton = j.at("singleton").get<bool>();
  t.chosen = j.at("chosen").get<std::size_t>();
  for (const auto& s : j.at("steps")) {
    ReductionStep step;
    step.functional_index = s.at("functional_index").get<std::size_t>();
    step.lambda = s.at("lambda").get<double>();
    step.phi = s.at("phi").get<std::string>();
    step.survivors = s.at("survivors").get<std::vector<std::size_t>>();
    step.max_value = s.at("max_value").get<double>();
    step.spread = s.at("spread").get<double>();
    t.steps.push_back(std::move(step));
  }
  return t;
}

inline json selection_entries_to_json(const std::vector<SelectedPath>& entries) {
  json out = json::array();
  for (const auto& e : entries) {
    out.push_back({{"initial", e.initial},
                   {"label", e.label},
                   {"path", trajectory_to_json(e.path)},
                   {"trace", trace_to_json(e.trace)}});
  }
  return out;
}

inline std::vector<SelectedPath> selection_entries_from_json(const json& j) {
  std::vector<SelectedPath> out;
  try {
    for (const auto& e : j) {
      out.push_back({e.at("initial").get<State>(), trajectory_from_json(e.at("path")), e.at("label").get<std::string>(),
                     trace_from_json(e.at("trace"))});
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed selection: ") + ex.what());
  }
  return out;
}

// ---- controlled chains --------------------------------------------------

/// {"m": m, "N": N, "kernels": {"0": [[p...], ...], ...}}
inline json chain_to_json(const markov::ControlledChain& c) {
  json kernels = json::object();
  for (int x = 0; x < c.m; ++x) kernels[std::to_string(x)] = c.rows[static_cast<std::size_t>(x)];
  return {{"m", c.m}, {"N", c.N}, {"kernels", std::move(kernels)}};
}

inline markov::ControlledChain chain_from_json(const json& j) {
  markov::ControlledChain c;
  try {
    c.m = j.at("m").get<int>();
    c.N = j.at("N").get<int>();
    if (c.m < 2) throw ConfigError("instance needs m >= 2");
    c.rows.resize(static_cast<std::size_t>(c.m));
    for (const auto& [key, rows] : j.at("kernels").items()) {
      std::size_t pos = 0;
      int x = -1;
      try {
        x = std::stoi(key, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != key.size() || x < 0 || x >= c.m) throw ConfigError("kernel key \"" + key + "\" is not a state index");
      c.rows[static_cast<std::size_t>(x)] = rows.get<std::vector<std::vector<double>>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed Markov instance: ") + e.what());
  }
  try {
    c.validate();
  } catch (const ModelError& e) {
    throw ConfigError(std::string("invalid Markov instance: ") + e.what());
  }
  return c;
}

/// FNV-1a over the bytes of s, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace semiflow::io
