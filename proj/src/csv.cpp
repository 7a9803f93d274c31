#include "annstat/csv.hpp"

#include "annstat/error.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace annstat {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) throw NumericError("csv", "cannot format value");
    return std::string(buf.data(), end);
}

void CsvTable::add_row(std::vector<std::string> row) {
    rows.push_back(std::move(row));
}

namespace {

std::string quote_if_needed(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += quote_if_needed(cells[i]);
    }
    out += '\n';
}

std::vector<std::string> split_line(const std::string& line, const std::string& location) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    if (quoted) throw ParseError("csv", "unterminated quoted field", location);
    cells.push_back(std::move(cell));
    return cells;
}

}  // namespace

std::string CsvTable::to_string() const {
    std::string out;
    append_line(out, header);
    for (const auto& row : rows) append_line(out, row);
    return out;
}

CsvTable parse_csv_text(std::istream& in, const std::string& source_name) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (line.empty()) continue;
        const std::string location = source_name + ":" + std::to_string(line_no);
        auto cells = split_line(line, location);
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw ParseError("csv",
                             "expected " + std::to_string(table.header.size()) + " cells, found " +
                                 std::to_string(cells.size()),
                             location);
        }
        table.rows.push_back(std::move(cells));
    }
    if (!have_header) throw ParseError("csv", "missing header row", source_name + ":1");
    return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("csv", "cannot open " + path.string());
    return parse_csv_text(in, path.string());
}

double parse_number(std::string_view cell, const std::string& location) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ParseError("csv", "non-numeric cell '" + std::string(cell) + "'", location);
    }
    return value;
}

CsvTable matrix_to_csv(const Eigen::MatrixXd& values, const std::vector<std::string>& header) {
    CsvTable table;
    table.header = header;
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(values.cols()));
        for (Eigen::Index c = 0; c < values.cols(); ++c) row.push_back(format_double(values(r, c)));
        table.add_row(std::move(row));
    }
    return table;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("io", "cannot write " + tmp.string());
        out << content;
        if (!out) throw ConfigError("io", "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("io", "cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace annstat
