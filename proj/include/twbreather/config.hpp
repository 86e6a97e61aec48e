#pragma once

// Flat "key = value" run configuration. Lines starting with '#' are
// comments. Keys:
//
//   N                       mean particle number (required in files)
//   C                       coupling; or
//   C_as_multiple_of_invN   coupling in units of 1/N (default -8)
//   M, L                    lattice size (power of two) and box length
//   t_final, n_steps        integration span; dt = t_final / n_steps
//   n_traj, n_batches       ensemble size and error-bar batches
//   master_seed             64-bit seed of the counter-based streams
//   snapshot_stride         steps between observable snapshots
//   g1_stride               snapshots between G1 samples (0 disables)
//   grid_mode               balanced | periodic
//   deterministic_reduction true | false
//   outputs                 comma list of output names
//   output_dir              directory for CSVs and the manifest

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "twbreather/ensemble.hpp"
#include "twbreather/series_io.hpp"

namespace twb {

struct RunConfig {
  RunPlan plan;
  double t_final = 5;
  std::vector<Output> outputs = default_outputs();
  std::string output_dir = "twb_output";

  friend bool operator==(const RunConfig& a, const RunConfig& b);
};

/// Raw key/value pairs with the line each came from (0 for overrides).
struct Settings {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, Entry> values;
  std::string source = "<defaults>";

  void set(const std::string& key, const std::string& value, int line = 0);
};

std::vector<std::string_view> known_keys();

/// Parses config text; throws ConfigError naming the line on syntax errors
/// and on unknown or repeated keys.
Settings parse_settings(std::string_view text, const std::string& source = "<string>");

/// Applies "key=value" overrides on top of existing settings.
void apply_override(Settings& settings, std::string_view assignment);

/// Validates and converts settings. With require_N the key N must be present.
RunConfig resolve_config(const Settings& settings, bool require_N = true);

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Defaults plus overrides, without a file.
RunConfig default_config(const std::vector<std::string>& overrides = {});

/// Every setting with explicit values (C resolved), suitable for a manifest.
nlohmann::ordered_json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);

/// Text form of a config that parse_settings reads back identically.
std::string config_to_text(const RunConfig& config);

}  // namespace twb
