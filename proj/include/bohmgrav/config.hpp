#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bohmgrav/errors.hpp"
#include "bohmgrav/mesh.hpp"
#include "bohmgrav/quantum.hpp"

namespace bohmgrav {

// Discretization backend: 2D P1 triangles or the 1D radial finite-volume
// reduction on the unit disk.
enum class RunMode { fem2d, radial };

// Everything a command needs to run, resolved from a flat key = value file
// plus any overrides.  The defaults here are the documented defaults: a
// config file only has to name the keys it changes.
struct RunConfig {
  ModelParams params;
  IterationConfig iteration;
  RunMode mode = RunMode::fem2d;
  int mesh_level = 5;
  int radial_points = 4096;
  std::string output_dir = "out";
  bool export_csv = true;
  bool export_vtk = false;
  int jobs = 1;
};

// Shortest-edit-distance formatting of a double that parses back to the same
// bits: 17 significant digits always round-trip for IEEE binary64.
inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Known configuration keys, used for validation and typo suggestions.
inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "epsilon",        "sigma",        "domain",         "mode",
      "mesh_level",     "radial_points", "damping",       "newton_tol",
      "picard_tol",     "max_newton",   "max_picard",     "init",
      "bump_x",         "bump_y",       "bump_amplitude", "bump_width",
      "continuation_steps", "warm_start", "output_dir",   "export_formats",
      "jobs",
  };
  return keys;
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

inline std::string nearest_key(std::string_view key) {
  std::string best;
  std::size_t best_d = std::numeric_limits<std::size_t>::max();
  for (const auto& k : known_keys()) {
    const std::size_t d = edit_distance(key, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best_d <= 3 ? best : std::string{};
}

[[noreturn]] inline void config_fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

inline double parse_double(int line, std::string_view key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty())
    config_fail(line, "invalid number '" + value + "' for " + std::string(key));
  return v;
}

inline int parse_int(int line, std::string_view key, const std::string& value) {
  char* end = nullptr;
  const long v = std::strtol(value.c_str(), &end, 10);
  if (end != value.c_str() + value.size() || value.empty())
    config_fail(line, "invalid integer '" + value + "' for " + std::string(key));
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    config_fail(line, "integer out of range for " + std::string(key));
  return static_cast<int>(v);
}

inline bool parse_bool(int line, std::string_view key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  config_fail(line, std::string(key) + " must be true or false (got '" + value + "')");
}

}  // namespace detail

// Parse a flat key = value configuration.  Lines may carry # comments; blank
// lines are skipped; a repeated key keeps its last value.  Keys with a
// "result." prefix are ignored so a run manifest can be fed straight back in
// as a config.  Errors name the offending line, and an unknown key suggests
// the nearest known one.
inline RunConfig parse_config(const std::string& text) {
  using std::numbers::pi;
  RunConfig cfg;
  bool continuation_set = false;
  int mesh_level_line = 0, radial_points_line = 0, mode_line = 0;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line(text.data() + pos,
                          (eol == std::string::npos ? text.size() : eol) - pos);
    pos = (eol == std::string::npos) ? text.size() + 1 : eol + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      detail::config_fail(line_no, "expected 'key = value', got '" + std::string(line) + "'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) detail::config_fail(line_no, "missing key before '='");
    if (key.rfind("result.", 0) == 0) continue;

    if (key == "epsilon") {
      cfg.params.epsilon = detail::parse_double(line_no, key, value);
    } else if (key == "sigma") {
      cfg.params.sigma = detail::parse_double(line_no, key, value);
    } else if (key == "domain") {
      if (value == "disk") cfg.params.domain_kind = DomainKind::disk;
      else if (value == "square") cfg.params.domain_kind = DomainKind::square;
      else detail::config_fail(line_no, "domain must be disk or square (got '" + value + "')");
    } else if (key == "mode") {
      if (value == "fem2d") cfg.mode = RunMode::fem2d;
      else if (value == "radial") cfg.mode = RunMode::radial;
      else detail::config_fail(line_no, "mode must be fem2d or radial (got '" + value + "')");
      mode_line = line_no;
    } else if (key == "mesh_level") {
      cfg.mesh_level = detail::parse_int(line_no, key, value);
      if (cfg.mesh_level < 0 || cfg.mesh_level > 9)
        detail::config_fail(line_no, "mesh_level must be between 0 and 9");
      mesh_level_line = line_no;
    } else if (key == "radial_points") {
      cfg.radial_points = detail::parse_int(line_no, key, value);
      if (cfg.radial_points < 2)
        detail::config_fail(line_no, "radial_points must be at least 2");
      radial_points_line = line_no;
    } else if (key == "damping") {
      cfg.iteration.damping = detail::parse_double(line_no, key, value);
    } else if (key == "newton_tol") {
      cfg.iteration.newton_tol = detail::parse_double(line_no, key, value);
    } else if (key == "picard_tol") {
      cfg.iteration.picard_tol = detail::parse_double(line_no, key, value);
    } else if (key == "max_newton") {
      cfg.iteration.max_newton = detail::parse_int(line_no, key, value);
    } else if (key == "max_picard") {
      cfg.iteration.max_picard = detail::parse_int(line_no, key, value);
    } else if (key == "init") {
      if (value == "zero") cfg.iteration.init_kind = InitKind::zero;
      else if (value == "bump") cfg.iteration.init_kind = InitKind::bump;
      else detail::config_fail(line_no, "init must be zero or bump (got '" + value + "')");
    } else if (key == "bump_x") {
      cfg.iteration.bump_center[0] = detail::parse_double(line_no, key, value);
    } else if (key == "bump_y") {
      cfg.iteration.bump_center[1] = detail::parse_double(line_no, key, value);
    } else if (key == "bump_amplitude") {
      cfg.iteration.bump_amplitude = detail::parse_double(line_no, key, value);
    } else if (key == "bump_width") {
      cfg.iteration.bump_width = detail::parse_double(line_no, key, value);
    } else if (key == "continuation_steps") {
      cfg.iteration.continuation_steps = detail::parse_int(line_no, key, value);
      continuation_set = true;
    } else if (key == "warm_start") {
      cfg.iteration.newton_warm_start = detail::parse_bool(line_no, key, value);
    } else if (key == "output_dir") {
      if (value.empty()) detail::config_fail(line_no, "output_dir must not be empty");
      cfg.output_dir = value;
    } else if (key == "export_formats") {
      cfg.export_csv = cfg.export_vtk = false;
      std::size_t start = 0;
      while (start <= value.size()) {
        const auto comma = value.find(',', start);
        const std::string item(detail::trim(std::string_view(value).substr(
            start, (comma == std::string::npos ? value.size() : comma) - start)));
        if (item == "csv") cfg.export_csv = true;
        else if (item == "vtk") cfg.export_vtk = true;
        else detail::config_fail(line_no, "export_formats entries must be csv or vtk (got '" +
                                              item + "')");
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (!cfg.export_csv && !cfg.export_vtk)
        detail::config_fail(line_no, "export_formats must name at least one format");
    } else if (key == "jobs") {
      cfg.jobs = detail::parse_int(line_no, key, value);
      if (cfg.jobs < 1) detail::config_fail(line_no, "jobs must be at least 1");
    } else {
      const std::string hint = detail::nearest_key(key);
      detail::config_fail(line_no, "unknown key '" + key + "'" +
                                       (hint.empty() ? "" : " (did you mean '" + hint + "'?)"));
    }
  }

  // Cross-key consistency.  The resolution key must match the mode so a typo
  // in one of them cannot silently run at the wrong refinement.
  if (cfg.mode == RunMode::radial && mesh_level_line > 0)
    detail::config_fail(mesh_level_line, "mesh_level applies to mode = fem2d; use radial_points");
  if (cfg.mode == RunMode::fem2d && radial_points_line > 0)
    detail::config_fail(radial_points_line, "radial_points applies to mode = radial; use mesh_level");
  if (cfg.mode == RunMode::radial && cfg.params.domain_kind == DomainKind::square)
    detail::config_fail(mode_line > 0 ? mode_line : 1, "mode = radial requires domain = disk");

  // Unless stated explicitly, supercritical couplings get a continuation ramp
  // and subcritical ones are solved directly.
  if (!continuation_set)
    cfg.iteration.continuation_steps = (cfg.params.sigma > 8.0 * pi) ? 10 : 0;

  return cfg;
}

// The resolved configuration as ordered key/value pairs, one per known key.
// Feeding the rendered lines back through parse_config reproduces the config
// exactly (continuation_steps is written out, so the auto rule no longer
// applies).
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> e;
  e.emplace_back("epsilon", format_g17(cfg.params.epsilon));
  e.emplace_back("sigma", format_g17(cfg.params.sigma));
  e.emplace_back("domain", cfg.params.domain_kind == DomainKind::disk ? "disk" : "square");
  e.emplace_back("mode", cfg.mode == RunMode::fem2d ? "fem2d" : "radial");
  if (cfg.mode == RunMode::fem2d)
    e.emplace_back("mesh_level", std::to_string(cfg.mesh_level));
  else
    e.emplace_back("radial_points", std::to_string(cfg.radial_points));
  e.emplace_back("damping", format_g17(cfg.iteration.damping));
  e.emplace_back("newton_tol", format_g17(cfg.iteration.newton_tol));
  e.emplace_back("picard_tol", format_g17(cfg.iteration.picard_tol));
  e.emplace_back("max_newton", std::to_string(cfg.iteration.max_newton));
  e.emplace_back("max_picard", std::to_string(cfg.iteration.max_picard));
  e.emplace_back("init", cfg.iteration.init_kind == InitKind::zero ? "zero" : "bump");
  e.emplace_back("bump_x", format_g17(cfg.iteration.bump_center[0]));
  e.emplace_back("bump_y", format_g17(cfg.iteration.bump_center[1]));
  e.emplace_back("bump_amplitude", format_g17(cfg.iteration.bump_amplitude));
  e.emplace_back("bump_width", format_g17(cfg.iteration.bump_width));
  e.emplace_back("continuation_steps", std::to_string(cfg.iteration.continuation_steps));
  e.emplace_back("warm_start", cfg.iteration.newton_warm_start ? "true" : "false");
  e.emplace_back("output_dir", cfg.output_dir);
  e.emplace_back("export_formats", cfg.export_csv && cfg.export_vtk ? "csv,vtk"
                                   : cfg.export_vtk               ? "vtk"
                                                                  : "csv");
  e.emplace_back("jobs", std::to_string(cfg.jobs));
  return e;
}

}  // namespace bohmgrav
