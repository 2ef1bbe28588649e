#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mvrfd::csv {

using Row = std::vector<std::string>;

/// Reads a comma-separated file. Accepts LF or CRLF line endings and
/// double-quoted fields; a trailing empty line is ignored.
std::vector<Row> read_file(const std::filesystem::path& path);

/// Splits one line into fields (quotes honored, CR stripped).
Row split_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

std::string join(const Row& fields);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a finite real; throws DataError naming `where` on failure.
double parse_double(std::string_view text, std::string_view where);

}  // namespace mvrfd::csv
