#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace semscale::io {

std::string read_file(const std::filesystem::path& path);

// Writes through a temporary sibling and renames, so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> read_lines(const std::filesystem::path& path);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Shortest round-trip decimal representation; identical across runs for identical doubles.
std::string format_double(double v);

// Minimal RFC 4180 CSV.
std::string csv_escape(std::string_view field);
std::vector<std::string> csv_split(std::string_view line);

struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
std::string to_csv(const CsvTable& table);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

} // namespace semscale::io
