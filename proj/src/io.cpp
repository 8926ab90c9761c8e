#include "semscale/io.hpp"

#include "semscale/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace semscale::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw MissingInputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content)
{
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
      throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<std::string> read_lines(const fs::path& path)
{
  std::string all = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < all.size()) {
    std::size_t end = all.find('\n', start);
    if (end == std::string::npos)
      end = all.size();
    std::string line = all.substr(start, end - start);
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::string sha256_hex(std::string_view bytes)
{
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const fs::path& path)
{
  return sha256_hex(read_file(path));
}

std::string format_double(double v)
{
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  if (v == 0.0)
    v = 0.0; // fold -0
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc())
    throw Error("format_double failed");
  return std::string(buf.data(), ptr);
}

std::string csv_escape(std::string_view field)
{
  if (field.find_first_of(",\"\n\r") == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"')
      out += "\"\"";
    else
      out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<std::string> csv_split(std::string_view line)
{
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted)
    throw DataError("unterminated quote in CSV line");
  fields.push_back(std::move(cur));
  return fields;
}

std::size_t CsvTable::column(std::string_view name) const
{
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name)
      return i;
  throw DataError("CSV has no column '" + std::string(name) + "'");
}

CsvTable read_csv(const fs::path& path)
{
  auto lines = read_lines(path);
  CsvTable t;
  bool first = true;
  for (const auto& line : lines) {
    if (line.empty())
      continue;
    auto fields = csv_split(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError(path.string() + ": row has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  if (first)
    throw DataError(path.string() + ": empty CSV");
  return t;
}

std::string to_csv(const CsvTable& table)
{
  std::string out;
  auto emit = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i)
        out.push_back(',');
      out += csv_escape(row[i]);
    }
    out.push_back('\n');
  };
  emit(table.header);
  for (const auto& r : table.rows)
    emit(r);
  return out;
}

double parse_double(std::string_view s)
{
  if (s == "nan")
    return std::nan("");
  if (s == "inf")
    return INFINITY;
  if (s == "-inf")
    return -INFINITY;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("not a number: '" + std::string(s) + "'");
  return v;
}

long long parse_int(std::string_view s)
{
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("not an integer: '" + std::string(s) + "'");
  return v;
}

} // namespace semscale::io
