#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

namespace pnr::io {

//! Serializes a double with 17 significant digits so it round-trips exactly.
std::string format_double(double v);

//! Writes a matrix as CSV under a one-line header naming the columns.
void write_matrix_csv(const std::filesystem::path& path, const std::string& header,
                      const Eigen::MatrixXd& matrix);

//! Reads a CSV of doubles, skipping the single header line.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

}  // namespace pnr::io
