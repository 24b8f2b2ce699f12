#pragma once

#include "outrate/types.hpp"

#include <iosfwd>
#include <string>

namespace outrate {

inline constexpr int kSchemaVersion = 1;

// Build identifier baked in at configure time ("unknown" outside a git checkout).
const char* build_hash();

// Binary dense matrix: 8-byte magic, uint64 rows, uint64 cols, column-major doubles.
void write_matrix(std::ostream& out, const MatrixXd& m);
MatrixXd read_matrix(std::istream& in);
void write_matrix_file(const std::string& path, const MatrixXd& m);
MatrixXd read_matrix_file(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// ISO-8601 UTC wall-clock time, for sidecars only.
std::string utc_now();

}  // namespace outrate
