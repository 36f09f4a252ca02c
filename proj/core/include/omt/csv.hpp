#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace omt::csv {

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double value);

void write_header(std::ostream& os, const std::vector<std::string>& columns);
void write_row(std::ostream& os, std::span<const double> values);

}  // namespace omt::csv
