#include "yieldnet/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include <unistd.h>

#include "yieldnet/error.hpp"

namespace yieldnet {
namespace fs = std::filesystem;

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc{}) throw ContractViolation("format_double: conversion failed");
  return std::string(buffer, end);
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return buffer.str();
}

namespace {

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      return fields;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string where(const CsvTable& t, std::size_t row, std::size_t col) {
  std::string s = t.path.string() + ": line " + std::to_string(t.lines.at(row));
  if (col < t.header.size()) s += ", column " + std::to_string(col + 1) + " (" + t.header[col] + ")";
  return s;
}

}  // namespace

CsvTable parse_csv(std::string_view text, const fs::path& path_for_messages) {
  CsvTable table;
  table.path = path_for_messages;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      table.comments.emplace_back(line.substr(1));
      continue;
    }
    auto fields = split_fields(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw IoError(path_for_messages.string() + ": line " + std::to_string(line_no) + ": expected " +
                    std::to_string(table.header.size()) + " columns, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.lines.push_back(line_no);
  }
  if (!have_header) throw IoError(path_for_messages.string() + ": missing header line");
  return table;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_file(path), path); }

void CsvTable::expect_header(std::span<const std::string_view> expected) const {
  bool same = header.size() == expected.size();
  for (std::size_t i = 0; same && i < header.size(); ++i) same = header[i] == expected[i];
  if (same) return;
  std::string want;
  for (auto h : expected) want += (want.empty() ? "" : ",") + std::string(h);
  throw IoError(path.string() + ": header must be '" + want + "'");
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw IoError(path.string() + ": no column named '" + std::string(name) + "'");
}

const std::string& CsvTable::text(std::size_t row, std::size_t col) const { return rows.at(row).at(col); }

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& f = text(row, col);
  double value = 0.0;
  auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
  if (f.empty() || ec != std::errc{} || end != f.data() + f.size() || !std::isfinite(value)) {
    throw IoError(where(*this, row, col) + ": expected a finite number, found '" + f + "'");
  }
  return value;
}

std::optional<double> CsvTable::optional_number(std::size_t row, std::size_t col) const {
  if (text(row, col).empty()) return std::nullopt;
  return number(row, col);
}

long CsvTable::integer(std::size_t row, std::size_t col, long lo, long hi) const {
  const std::string& f = text(row, col);
  long value = 0;
  auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
  if (f.empty() || ec != std::errc{} || end != f.data() + f.size()) {
    throw IoError(where(*this, row, col) + ": expected an integer, found '" + f + "'");
  }
  if (value < lo || value > hi) {
    throw IoError(where(*this, row, col) + ": value " + f + " outside " + std::to_string(lo) + ".." +
                  std::to_string(hi));
  }
  return value;
}

CsvWriter::CsvWriter(std::span<const std::string_view> header, std::string_view comment) {
  if (!comment.empty()) {
    text_ += '#';
    text_ += comment;
    text_ += '\n';
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) text_ += ',';
    text_ += header[i];
  }
  text_ += '\n';
}

CsvWriter& CsvWriter::field(std::string_view text) {
  if (row_open_) text_ += ',';
  text_ += text;
  row_open_ = true;
  return *this;
}

CsvWriter& CsvWriter::field(double value) { return field(format_double(value)); }
CsvWriter& CsvWriter::field(long long value) { return field(std::to_string(value)); }
CsvWriter& CsvWriter::empty_field() { return field(std::string_view{}); }

void CsvWriter::end_row() {
  text_ += '\n';
  row_open_ = false;
}

namespace {

constexpr std::string_view kYieldHeader[] = {"county_id", "state_id", "year", "crop", "yield_bu_acre"};
constexpr std::string_view kWeatherHeader[] = {"county_id", "year", "variable", "week", "value"};
constexpr std::string_view kSoilHeader[] = {"county_id", "variable", "depth_index", "value"};
constexpr std::string_view kSurfaceHeader[] = {"county_id", "variable", "value"};
constexpr std::string_view kManagementHeader[] = {"state_id", "year", "week", "cum_planted_pct"};

constexpr long kMaxId = 100'000'000;

CsvWriter& maybe(CsvWriter& w, double value) { return std::isnan(value) ? w.empty_field() : w.field(value); }

}  // namespace

void write_dataset(const fs::path& dir, std::span<const CountyYearRecord> records, std::string_view comment) {
  std::vector<const CountyYearRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return std::tuple(a->county_id, a->year, a->crop) < std::tuple(b->county_id, b->year, b->crop);
  });

  CsvWriter yield(kYieldHeader, comment), weather(kWeatherHeader, comment), soil(kSoilHeader, comment),
      surface(kSurfaceHeader, comment), management(kManagementHeader, comment);
  std::set<std::pair<int, int>> weather_done, management_done;
  std::set<int> soil_done;
  std::map<std::pair<int, int>, const CountyYearRecord*> management_rows;

  for (const auto* r : sorted) {
    yield.field(static_cast<long long>(r->county_id)).field(static_cast<long long>(r->state_id));
    yield.field(static_cast<long long>(r->year)).field(crop_name(r->crop));
    if (r->yield) yield.field(*r->yield); else yield.empty_field();
    yield.end_row();

    if (weather_done.insert({r->county_id, r->year}).second) {
      for (std::size_t v = 0; v < kWeatherVars; ++v) {
        for (std::size_t w = 0; w < kWeeks; ++w) {
          weather.field(static_cast<long long>(r->county_id)).field(static_cast<long long>(r->year));
          weather.field(static_cast<long long>(v + 1)).field(static_cast<long long>(w + 1));
          maybe(weather, r->weather_at(v, w)).end_row();
        }
      }
    }
    if (soil_done.insert(r->county_id).second) {
      for (std::size_t v = 0; v < kSoilVars; ++v) {
        for (std::size_t d = 0; d < kSoilDepths; ++d) {
          soil.field(static_cast<long long>(r->county_id)).field(static_cast<long long>(v + 1));
          soil.field(static_cast<long long>(d + 1));
          maybe(soil, r->soil_profile[v * kSoilDepths + d]).end_row();
        }
      }
      for (std::size_t v = 0; v < kSoilSurface; ++v) {
        surface.field(static_cast<long long>(r->county_id)).field(static_cast<long long>(v + 1));
        maybe(surface, r->soil_surface[v]).end_row();
      }
    }
    management_rows.emplace(std::pair{r->state_id, r->year}, r);
  }
  for (const auto& [key, r] : management_rows) {
    for (std::size_t w = 0; w < r->management.size(); ++w) {
      management.field(static_cast<long long>(key.first)).field(static_cast<long long>(key.second));
      management.field(static_cast<long long>(w + 1));
      maybe(management, r->management[w]).end_row();
    }
  }

  write_file_atomic(dir / kYieldFile, yield.text());
  write_file_atomic(dir / kWeatherFile, weather.text());
  write_file_atomic(dir / kSoilFile, soil.text());
  write_file_atomic(dir / kSurfaceFile, surface.text());
  write_file_atomic(dir / kManagementFile, management.text());
}

std::vector<CountyYearRecord> read_dataset(const fs::path& dir) {
  const CsvTable yields = read_csv(dir / kYieldFile);
  yields.expect_header(kYieldHeader);
  const CsvTable weather = read_csv(dir / kWeatherFile);
  weather.expect_header(kWeatherHeader);
  const CsvTable soil = read_csv(dir / kSoilFile);
  soil.expect_header(kSoilHeader);
  const CsvTable surface = read_csv(dir / kSurfaceFile);
  surface.expect_header(kSurfaceHeader);
  const CsvTable management = read_csv(dir / kManagementFile);
  management.expect_header(kManagementHeader);

  std::size_t management_weeks = 0;
  std::map<std::pair<int, int>, std::map<std::size_t, double>> management_values;
  for (std::size_t i = 0; i < management.rows.size(); ++i) {
    const int state = static_cast<int>(management.integer(i, 0, 0, kMaxId));
    const int year = static_cast<int>(management.integer(i, 1, 0, 9999));
    const auto week = static_cast<std::size_t>(management.integer(i, 2, 1, 52));
    const auto value = management.optional_number(i, 3);
    if (value && (*value < 0.0 || *value > 100.0)) {
      throw IoError(management.path.string() + ": line " + std::to_string(management.lines[i]) +
                    ", column 4 (cum_planted_pct): value outside 0..100");
    }
    management_weeks = std::max(management_weeks, week);
    management_values[{state, year}][week - 1] = value.value_or(std::numeric_limits<double>::quiet_NaN());
  }
  if (management_weeks == 0) management_weeks = kDefaultManagementWeeks;

  std::map<std::pair<int, int>, std::vector<double>> weather_values;
  for (std::size_t i = 0; i < weather.rows.size(); ++i) {
    const int county = static_cast<int>(weather.integer(i, 0, 0, kMaxId));
    const int year = static_cast<int>(weather.integer(i, 1, 0, 9999));
    const auto var = static_cast<std::size_t>(weather.integer(i, 2, 1, kWeatherVars));
    const auto week = static_cast<std::size_t>(weather.integer(i, 3, 1, kWeeks));
    auto& cells = weather_values[{county, year}];
    if (cells.empty()) cells.assign(kWeatherVars * kWeeks, std::numeric_limits<double>::quiet_NaN());
    cells[(var - 1) * kWeeks + (week - 1)] = weather.number(i, 4);
  }

  std::map<int, std::vector<double>> soil_values, surface_values;
  for (std::size_t i = 0; i < soil.rows.size(); ++i) {
    const int county = static_cast<int>(soil.integer(i, 0, 0, kMaxId));
    const auto var = static_cast<std::size_t>(soil.integer(i, 1, 1, kSoilVars));
    const auto depth = static_cast<std::size_t>(soil.integer(i, 2, 1, kSoilDepths));
    auto& cells = soil_values[county];
    if (cells.empty()) cells.assign(kSoilVars * kSoilDepths, std::numeric_limits<double>::quiet_NaN());
    cells[(var - 1) * kSoilDepths + (depth - 1)] =
        soil.optional_number(i, 3).value_or(std::numeric_limits<double>::quiet_NaN());
  }
  for (std::size_t i = 0; i < surface.rows.size(); ++i) {
    const int county = static_cast<int>(surface.integer(i, 0, 0, kMaxId));
    const auto var = static_cast<std::size_t>(surface.integer(i, 1, 1, kSoilSurface));
    auto& cells = surface_values[county];
    if (cells.empty()) cells.assign(kSoilSurface, std::numeric_limits<double>::quiet_NaN());
    cells[var - 1] = surface.optional_number(i, 2).value_or(std::numeric_limits<double>::quiet_NaN());
  }

  std::vector<CountyYearRecord> records;
  std::set<std::tuple<int, int, int>> seen;
  for (std::size_t i = 0; i < yields.rows.size(); ++i) {
    const int county = static_cast<int>(yields.integer(i, 0, 0, kMaxId));
    const int state = static_cast<int>(yields.integer(i, 1, 0, kMaxId));
    const int year = static_cast<int>(yields.integer(i, 2, 0, 9999));
    Crop crop;
    try {
      crop = parse_crop(yields.text(i, 3));
    } catch (const ContractViolation&) {
      throw IoError(yields.path.string() + ": line " + std::to_string(yields.lines[i]) +
                    ", column 4 (crop): expected corn or soybean, found '" + yields.text(i, 3) + "'");
    }
    if (!seen.insert({county, year, static_cast<int>(crop)}).second) {
      throw IoError(yields.path.string() + ": line " + std::to_string(yields.lines[i]) +
                    ": duplicate county/year/crop row");
    }
    auto r = CountyYearRecord::blank(county, state, year, crop, management_weeks);
    r.yield = yields.optional_number(i, 4);

    auto w = weather_values.find({county, year});
    if (w == weather_values.end()) {
      throw DataError("no weather rows for county " + std::to_string(county) + " year " + std::to_string(year));
    }
    for (std::size_t c = 0; c < w->second.size(); ++c) {
      if (std::isnan(w->second[c])) {
        throw DataError("weather for county " + std::to_string(county) + " year " + std::to_string(year) +
                        " lacks " + std::string(weather_variable_name(c / kWeeks)) + " week " +
                        std::to_string(c % kWeeks + 1));
      }
    }
    r.weather = w->second;
    if (auto s = soil_values.find(county); s != soil_values.end()) r.soil_profile = s->second;
    if (auto s = surface_values.find(county); s != surface_values.end()) r.soil_surface = s->second;
    if (auto m = management_values.find({state, year}); m != management_values.end()) {
      for (const auto& [week, value] : m->second) r.management[week] = value;
    }
    records.push_back(std::move(r));
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tuple(a.county_id, a.year, a.crop) < std::tuple(b.county_id, b.year, b.crop);
  });
  return records;
}

}  // namespace yieldnet
