#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace annstat {

// Shortest decimal text that parses back to the same double (at most 17
// significant digits).
std::string format_double(double value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    std::string to_string() const;
};

// Comma-separated, '.' decimal, header row. Quoted fields may contain commas
// and doubled quotes.
CsvTable parse_csv_text(std::istream& in, const std::string& source_name);
CsvTable read_csv_file(const std::filesystem::path& path);

// Parses a numeric cell; throws ParseError naming `location` on failure.
double parse_number(std::string_view cell, const std::string& location);

CsvTable matrix_to_csv(const Eigen::MatrixXd& values, const std::vector<std::string>& header);

// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace annstat
