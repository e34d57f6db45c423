#pragma once

#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lpo {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// RFC 4180 field quoting: fields containing a comma, quote, CR or LF are
/// wrapped in quotes with embedded quotes doubled.
std::string csv_field(std::string_view field);

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

/// Parses RFC 4180 text into rows of fields. Accepts LF or CRLF line ends.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace lpo
