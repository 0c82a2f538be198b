#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "yieldnet/data.hpp"

namespace yieldnet {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// A parsed CSV file. Lines starting with '#' are comments; the first other
/// line is the header.
struct CsvTable {
  std::filesystem::path path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based source line of each row, for diagnostics.
  std::vector<std::size_t> lines;
  std::vector<std::string> comments;

  /// Throws IoError unless the header equals `expected`.
  void expect_header(std::span<const std::string_view> expected) const;
  std::size_t column(std::string_view name) const;

  /// Field parsers; failures throw IoError naming file, line and column.
  double number(std::size_t row, std::size_t col) const;
  std::optional<double> optional_number(std::size_t row, std::size_t col) const;
  long integer(std::size_t row, std::size_t col, long lo, long hi) const;
  const std::string& text(std::size_t row, std::size_t col) const;
};

CsvTable parse_csv(std::string_view text, const std::filesystem::path& path_for_messages);
CsvTable read_csv(const std::filesystem::path& path);

/// Builds CSV text; every field is written verbatim.
class CsvWriter {
 public:
  explicit CsvWriter(std::span<const std::string_view> header, std::string_view comment = {});
  CsvWriter& field(std::string_view text);
  CsvWriter& field(double value);
  CsvWriter& field(long long value);
  CsvWriter& empty_field();
  void end_row();
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  bool row_open_ = false;
};

/// File names of the ingestion schema.
inline constexpr std::string_view kYieldFile = "yield.csv";
inline constexpr std::string_view kWeatherFile = "weather.csv";
inline constexpr std::string_view kSoilFile = "soil.csv";
inline constexpr std::string_view kSurfaceFile = "soil_surface.csv";
inline constexpr std::string_view kManagementFile = "management.csv";
inline constexpr std::string_view kSyntheticMetaFile = "synthetic_meta.json";

/// Writes the five CSVs. `comment` (without '#') is placed on the first
/// line of each file when non-empty.
void write_dataset(const std::filesystem::path& dir, std::span<const CountyYearRecord> records,
                   std::string_view comment = {});

/// Reads the five CSVs into one record per yield.csv row, ordered by
/// (county, year, crop). Soil and management gaps stay NaN for the imputation
/// step; missing weather is a DataError.
std::vector<CountyYearRecord> read_dataset(const std::filesystem::path& dir);

}  // namespace yieldnet
