#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "qomor/systems.hpp"

namespace qomor {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

/// Strict decimal parse; `field` names the source in diagnostics.
double parse_double(std::string_view text, const std::string& field);

struct WriteOptions {
  /// Matrices with more than this many rows or columns go to a Matrix
  /// Market sidecar next to the manifest.
  Index sidecar_threshold = 200;
};

/// JSON manifest {"name", "kind": "ldqo", "n", "m", "matrices": {"A", "B",
/// "M"}} where each matrix is a nested array of decimal strings (rows) or
/// {"file": "<sidecar.mtx>"} relative to the manifest.
LdqoSystem<double> read_system(const std::filesystem::path& path);
/// Same as read_system for manifest text; sidecars resolve against base.
LdqoSystem<double> parse_system(const std::string& text, const std::filesystem::path& base);
void write_system(const LdqoSystem<double>& sys, const std::filesystem::path& path,
                  const std::string& name = "system", const WriteOptions& options = {});

/// Manifest of kind "qb" with matrices A, B, C, H and N0..N{m-1}.
void write_qb_system(const QbSystem<double>& sys, const std::filesystem::path& path,
                     const std::string& name = "qb_system", const WriteOptions& options = {});
QbSystem<double> read_qb_system(const std::filesystem::path& path);

/// Matrix Market reader: coordinate or array, real or integer, general or
/// symmetric.
Matrix<double> read_matrix_market(const std::filesystem::path& path);
/// Writes the array (dense, column-major) general format.
void write_matrix_market(const Matrix<double>& x, const std::filesystem::path& path);

}  // namespace qomor
