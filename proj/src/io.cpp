#include "nnreg/io.hpp"

#include "nnreg/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace nnreg::io {

std::string format_double(double v) {
  // std::to_chars is locale independent; precision 17 matches %.17g.
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s, const std::filesystem::path& path) {
  double v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e)
    throw IoError("cannot parse number '" + s + "' in " + path.string());
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

}  // namespace

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  auto os = open_out(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> r;
    for (const auto& f : split(line)) r.push_back(parse_double(f, path));
    if (!rows.empty() && r.size() != rows[0].size()) throw IoError("ragged matrix in " + path.string());
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw IoError("empty matrix file " + path.string());
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_grid_csv(const std::filesystem::path& path, const Grid2D& grid, const Vector& values) {
  if (values.size() != grid.size()) throw ContractViolation("write_grid_csv: size mismatch");
  auto os = open_out(path);
  os << "axis1,axis2,value\n";
  for (Index i = 0; i < grid.size(); ++i) {
    auto [a, b] = grid.centroid(i);
    os << format_double(a) << ',' << format_double(b) << ',' << format_double(values[i]) << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Vector read_grid_csv(const std::filesystem::path& path, const Grid2D& grid) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("axis1,axis2,value", 0) != 0)
    throw IoError("missing header in " + path.string());
  Vector v(grid.size());
  Index i = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 3) throw IoError("expected 3 columns in " + path.string());
    if (i >= grid.size()) throw IoError("too many rows in " + path.string());
    auto [a, b] = grid.centroid(i);
    const double fa = parse_double(f[0], path), fb = parse_double(f[1], path);
    if (std::abs(fa - a) > 1e-9 * (1 + std::abs(a)) || std::abs(fb - b) > 1e-9 * (1 + std::abs(b)))
      throw IoError("centroid mismatch at row " + std::to_string(i + 1) + " of " + path.string());
    v[i++] = parse_double(f[2], path);
  }
  if (i != grid.size()) throw IoError("too few rows in " + path.string());
  return v;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto os = open_out(path);
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace nnreg::io
