#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cards::harness {

/// Column-labeled CSV table.  Writing is canonical (stable quoting, '\n'
/// line ends), so equal tables produce byte-identical files.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    /// Throws std::invalid_argument when the row width differs from the
    /// column count.
    void add_row(std::vector<std::string> row);
};

/// Quotes fields containing commas, quotes, or newlines (RFC 4180 style).
std::string csv_escape(const std::string& field);

std::string csv_text(const CsvTable& table);
void save_csv(const CsvTable& table, const std::string& path);

/// Parses what csv_text produces (quoted fields included).
CsvTable parse_csv(const std::string& text);
CsvTable load_csv(const std::string& path);

/// Canonical number rendering for reports: %.9g.
std::string format_value(double v);
std::string format_value(std::int64_t v);

}  // namespace cards::harness
