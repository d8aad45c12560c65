#include "adacrit/csv.hpp"

#include "adacrit/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace adacrit {

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line, std::size_t column,
                       const std::string& message)
{
    throw Error(ErrorCode::InvalidArgument, source + ":" + std::to_string(line) + ":"
                                                + std::to_string(column) + ": " + message);
}

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

} // namespace

std::string format_double(double value)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

Matrix parse_matrix_csv(std::istream& is, const std::string& source_name, bool header)
{
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (header && line_no == 1) {
            continue;
        }
        if (trim(line).empty()) {
            continue;
        }
        std::vector<double> row;
        std::size_t start = 0;
        std::size_t column = 1;
        for (;;) {
            const auto comma = line.find(',', start);
            const std::string field =
                trim(std::string_view(line).substr(start, comma == std::string::npos
                                                              ? std::string::npos
                                                              : comma - start));
            double value = 0.0;
            const char* first = field.data();
            const char* last = first + field.size();
            if (!field.empty() && *first == '+') {
                ++first;
            }
            const auto res = std::from_chars(first, last, value);
            if (field.empty() || res.ec != std::errc() || res.ptr != last) {
                fail(source_name, line_no, column, "expected a number, got '" + field + "'");
            }
            if (!std::isfinite(value)) {
                fail(source_name, line_no, column, "non-finite value");
            }
            row.push_back(value);
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
            ++column;
        }
        if (rows.empty()) {
            width = row.size();
        } else if (row.size() != width) {
            fail(source_name, line_no, row.size(),
                 "expected " + std::to_string(width) + " columns, got " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        fail(source_name, line_no, 0, "no data rows");
    }
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            out(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
        }
    }
    return out;
}

Matrix read_matrix_csv(const std::filesystem::path& path, bool header)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
    }
    return parse_matrix_csv(in, path.string(), header);
}

Vector read_vector_csv(const std::filesystem::path& path, bool header)
{
    const Matrix m = read_matrix_csv(path, header);
    if (m.cols() != 1) {
        throw Error(ErrorCode::InvalidArgument,
                    path.string() + ": expected a single column, got " + std::to_string(m.cols()));
    }
    return m.col(0);
}

void write_vector_csv(std::ostream& os, const Vector& v)
{
    for (Index i = 0; i < v.size(); ++i) {
        os << format_double(v[i]) << '\n';
    }
}

} // namespace adacrit
