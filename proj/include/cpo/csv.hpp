#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cpo::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column, or -1.
    int column(std::string_view name) const;
};

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_line(std::string_view line);

// Reads a whole file. Header row required; blank lines skipped; a UTF-8 BOM
// and trailing '\r' are stripped. Throws DataError if the file is missing.
Table read(const std::filesystem::path& path);

// Quotes a field only when it needs it.
std::string escape(std::string_view field);

// Shortest text that round-trips: 17 significant digits.
std::string format_double(double value);

// Writes to a sibling temporary file then renames over the target.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace cpo::csv
