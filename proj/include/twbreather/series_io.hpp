#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "twbreather/ensemble.hpp"

namespace twb {

/// First line of every CSV the tool writes. Bump on any schema change.
inline constexpr std::string_view kCsvVersionLine = "# twbreather-csv v1";
inline constexpr std::string_view kG1VersionLine = "# twbreather-g1 v1";

enum class Output { density_map, center_density, mu, eigenvalues, invariants, com, g1_matrix };

std::string_view output_name(Output o);
/// Parses one output name; throws ConfigError on unknown names.
Output parse_output(std::string_view name);
std::vector<Output> default_outputs();

/// File name and exact header row of a CSV output.
std::string_view output_file(Output o);
std::string_view output_header(Output o);

/// Shortest text that is at least 17 significant digits and parses back to
/// the identical double.
std::string format_double(double v);

/// Writes the requested outputs into `dir` (created if needed) and returns
/// the paths written. g1_matrix needs a series produced with keep_g1.
std::vector<std::filesystem::path> write_series(const ObservableSeries& series,
                                                const std::filesystem::path& dir,
                                                const std::vector<Output>& outputs);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Reads a CSV written by write_series (version line, header, numeric rows).
CsvTable read_csv(const std::filesystem::path& path);

/// Writes `text` to `path`, throwing IoError with the path on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace twb
