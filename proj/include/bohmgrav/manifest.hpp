#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bohmgrav/config.hpp"
#include "bohmgrav/export.hpp"
#include "bohmgrav/version.hpp"

namespace bohmgrav {

// Ordered result entries for a run manifest.  Keys are written with a
// "result." prefix, which parse_config skips, so a manifest doubles as a
// config that reproduces the run.
using ResultEntries = std::vector<std::pair<std::string, std::string>>;

inline std::string manifest_text(const std::string& command, const RunConfig& cfg,
                                 const ResultEntries& results) {
  std::string out = "# run manifest: every key below result.* is a valid config key,\n";
  out += "# so this file can be passed back as --config to repeat the run.\n";
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  out += "result.command = " + command + "\n";
  out += "result.version = " + std::string(version_string) + "\n";
  for (const auto& [k, v] : results) out += "result." + k + " = " + v + "\n";
  return out;
}

inline void write_manifest(const std::string& path, const std::string& command,
                           const RunConfig& cfg, const ResultEntries& results) {
  detail::write_text_file(path, manifest_text(command, cfg, results));
}

}  // namespace bohmgrav
