#pragma once

#include "nnreg/biosensor.hpp"
#include "nnreg/operators.hpp"

#include <filesystem>
#include <string>

namespace nnreg::io {

/// %.17g in the C locale; round-trips doubles exactly.
std::string format_double(double v);

/// Plain rows, comma separated, no header.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Header `axis1,axis2,value`, one row per cell centroid in cell order.
void write_grid_csv(const std::filesystem::path& path, const Grid2D& grid, const Vector& values);
/// Reads the value column and checks the centroids against `grid`.
Vector read_grid_csv(const std::filesystem::path& path, const Grid2D& grid);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace nnreg::io
