#pragma once

#include "amnesia/association_matrix.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace amnesia {

enum class MatrixFormat { Csv, Binary };

MatrixFormat parse_matrix_format(const std::string& text);
// Binary when the extension is .amx, CSV otherwise.
MatrixFormat format_from_path(const std::filesystem::path& path);

// CSV layout: header `task_id,<example ids...>`, then one row per task.
// Empty cells are unobserved. CSV carries no kind tag, so the caller states
// it (continuous when omitted). The binary layout records its own kind.
AssociationMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format,
                              std::optional<ValueKind> kind = std::nullopt);
void save_matrix(const AssociationMatrix& m, const std::filesystem::path& path, MatrixFormat format);

AssociationMatrix parse_matrix_csv(std::string_view text, ValueKind kind);
std::string render_matrix_csv(const AssociationMatrix& m);

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

/// Writes an 8-bit binary graymap (P5), N wide by M tall. Values are clamped
/// into [lo, hi] and mapped linearly onto 0..255; unobserved cells are 0.
void export_heatmap(const AssociationMatrix& m, const std::filesystem::path& path, double lo, double hi);
std::vector<unsigned char> heatmap_pixels(const Eigen::MatrixXd& values, const Mask& observed, double lo, double hi);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace amnesia
