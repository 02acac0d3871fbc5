#pragma once

// Minimal CSV emission: header row, comma separator, LF line ends, fields
// quoted only when they contain a comma, a quote or a line break.

#include "hypmix/mobius.hpp"

#include <string>
#include <vector>

namespace hypmix {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row);
};

std::string csv_field(const std::string& s);
std::string to_csv(const CsvTable& t);
// Throws IoError when the file cannot be written.
void write_csv(const std::string& path, const CsvTable& t);
// Parser for the dialect above, used to check round trips.
CsvTable parse_csv(const std::string& text);

// Shortest text that reads back to the same double.
std::string format_double(double v);
std::string format_rational(const Rational& r);
Rational parse_rational(const std::string& s);

}  // namespace hypmix
