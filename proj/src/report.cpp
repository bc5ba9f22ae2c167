#include "qdet/report.hpp"

#include <cstdio>
#include <stdexcept>

#include "json.hpp"
#include "qdet/version.hpp"

namespace qdet {

void ReportTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns.size())
    throw std::invalid_argument("report row width does not match the column list");
  rows.push_back(std::move(cells));
}

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string format_int(long long x) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%lld", x);
  return buf;
}

std::uint64_t config_hash(const std::string& canonical_config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical_config) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace

void write_csv(std::ostream& os, const ReportTable& table, std::uint64_t hash) {
  for (size_t j = 0; j < table.columns.size(); ++j)
    os << (j ? "," : "") << csv_cell(table.columns[j]);
  os << '\n';
  for (const auto& row : table.rows) {
    for (size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << csv_cell(row[j]);
    os << '\n';
  }
  os << "# config_hash=" << hash_hex(hash) << " version=" << kVersion << '\n';
}

void write_json(std::ostream& os, const ReportTable& table, std::uint64_t hash) {
  nlohmann::json doc;
  doc["columns"] = table.columns;
  doc["rows"] = table.rows;
  doc["config_hash"] = hash_hex(hash);
  doc["version"] = kVersion;
  os << doc.dump(2) << '\n';
}

void write_report(std::ostream& os, const ReportTable& table, ReportFormat format,
                  std::uint64_t hash) {
  if (format == ReportFormat::CSV)
    write_csv(os, table, hash);
  else
    write_json(os, table, hash);
}

}  // namespace qdet
