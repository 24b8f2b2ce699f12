#include "outrate/io.hpp"

#include "outrate/error.hpp"

#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

#ifndef OUTRATE_BUILD_HASH
#define OUTRATE_BUILD_HASH "unknown"
#endif

namespace outrate {

namespace {
constexpr char kMatrixMagic[8] = {'O', 'R', 'M', 'A', 'T', '1', '\0', '\0'};
}

const char* build_hash() { return OUTRATE_BUILD_HASH; }

void write_matrix(std::ostream& out, const MatrixXd& m) {
  out.write(kMatrixMagic, sizeof kMatrixMagic);
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!out) throw Error("failed writing matrix");
}

MatrixXd read_matrix(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMatrixMagic, sizeof magic) != 0) throw ValidationError("not a matrix file");
  std::uint64_t dims[2];
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in || dims[0] > (1u << 20) || dims[1] > (1u << 20)) throw ValidationError("corrupt matrix header");
  MatrixXd m(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw ValidationError("truncated matrix file");
  return m;
}

void write_matrix_file(const std::string& path, const MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_matrix(out, m);
}

MatrixXd read_matrix_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open matrix file " + path);
  return read_matrix(in);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
}

std::string utc_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const auto day = std::chrono::floor<std::chrono::days>(now);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{now - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

}  // namespace outrate
