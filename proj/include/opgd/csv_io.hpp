#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace opgd::io {

/// Schema tags written as the first comment line of every CSV the library emits.
inline constexpr std::string_view kDatasetSchema = "opgd.dataset.v1";
inline constexpr std::string_view kCheckpointSchema = "opgd.checkpoint.v1";
inline constexpr std::string_view kTrajectorySchema = "opgd.trajectory.v1";
inline constexpr std::string_view kMatrixSchema = "opgd.matrix.v1";
inline constexpr std::string_view kSweepSchema = "opgd.sweep.v1";

/// Shortest-safe lossless decimal: 17 significant digits.
std::string format_double(double v);
double parse_double(std::string_view text);

struct CsvTable {
  std::string schema;  // from the "# schema: ..." line, empty if absent
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Parses comma-separated text. Lines starting with '#' are comments; the
/// first non-comment line is the header.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

std::string schema_line(std::string_view schema);

std::string read_text(const std::filesystem::path& path);
/// Writes atomically enough for our purposes (truncate + write); throws on I/O failure.
void write_text(const std::filesystem::path& path, const std::string& text);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace opgd::io
