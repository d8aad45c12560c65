#pragma once

#include "adacrit/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace adacrit {

/// Shortest decimal representation that parses back to the same double, period separator.
std::string format_double(double value);

/// Numeric CSV reader. Errors are Error(InvalidArgument) with "path:line:column: ..." text.
Matrix read_matrix_csv(const std::filesystem::path& path, bool header = false);
Matrix parse_matrix_csv(std::istream& is, const std::string& source_name, bool header = false);

Vector read_vector_csv(const std::filesystem::path& path, bool header = false);

void write_vector_csv(std::ostream& os, const Vector& v);

} // namespace adacrit
