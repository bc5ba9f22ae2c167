#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace qdet {

enum class ReportFormat { CSV, JSON };

// Long-format result table: a fixed column list and string cells. Numeric
// cells are formatted with format_real (10 significant digits) before
// insertion so CSV and JSON carry byte-identical values.
struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells);
};

std::string format_real(double x);
std::string format_int(long long x);

// FNV-1a 64 over the canonical config string; hex-printed in footers so a
// result file is traceable to the exact configuration that produced it.
std::uint64_t config_hash(const std::string& canonical_config);

// Header row + data rows + footer comment with config hash and tool version.
void write_csv(std::ostream& os, const ReportTable& table, std::uint64_t hash);
// Same content mirrored as {"columns", "rows", "config_hash", "version"}.
void write_json(std::ostream& os, const ReportTable& table, std::uint64_t hash);

void write_report(std::ostream& os, const ReportTable& table, ReportFormat format,
                  std::uint64_t hash);

}  // namespace qdet
