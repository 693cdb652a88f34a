#include "amnesia/matrix_io.hpp"

#include "byte_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace amnesia {

namespace {

constexpr char kMatrixMagic[4] = {'A', 'M', 'X', '1'};

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

// Splits on commas without copying.
void split_csv(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

MatrixFormat parse_matrix_format(const std::string& text) {
  if (text == "csv") return MatrixFormat::Csv;
  if (text == "binary" || text == "amx") return MatrixFormat::Binary;
  throw std::invalid_argument("unknown matrix format '" + text + "' (expected csv|binary)");
}

MatrixFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".amx" ? MatrixFormat::Binary : MatrixFormat::Csv;
}

std::string format_double(double v) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), v);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size() || text.empty())
    throw DataError("non-numeric cell '" + std::string(text) + "'");
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

AssociationMatrix parse_matrix_csv(std::string_view text, ValueKind kind) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = trim_cr(text.substr(start, nl - start));
    if (!line.empty()) lines.push_back(line);
    start = nl + 1;
  }
  if (lines.empty()) throw DataError("matrix CSV is empty");

  std::vector<std::string_view> cells;
  split_csv(lines[0], cells);
  if (cells.size() < 2 || cells[0] != "task_id") throw DataError("malformed header: expected 'task_id,<example ids>'");
  std::vector<std::string> example_ids(cells.begin() + 1, cells.end());
  const auto n = static_cast<Eigen::Index>(example_ids.size());
  const auto m = static_cast<Eigen::Index>(lines.size() - 1);
  if (m < 1) throw DataError("matrix CSV has no task rows");

  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(m, n);
  Mask observed = Mask::Constant(m, n, true);
  std::vector<std::string> task_ids;
  task_ids.reserve(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    split_csv(lines[i + 1], cells);
    if (static_cast<Eigen::Index>(cells.size()) != n + 1)
      throw DataError("ragged row " + std::to_string(i + 1) + ": expected " + std::to_string(n + 1) + " cells, got " +
                      std::to_string(cells.size()));
    task_ids.emplace_back(cells[0]);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto cell = cells[j + 1];
      if (cell.empty()) {
        observed(i, j) = false;
      } else {
        values(i, j) = parse_double(cell);
      }
    }
  }
  return AssociationMatrix(std::move(values), kind, std::move(task_ids), std::move(example_ids), std::move(observed));
}

std::string render_matrix_csv(const AssociationMatrix& m) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.rows() * m.cols() * 12 + 64));
  out += "task_id";
  for (const auto& id : m.example_ids()) {
    out += ',';
    out += id;
  }
  out += '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += m.task_ids()[i];
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out += ',';
      if (!m.is_observed(i, j)) continue;
      const auto r = std::to_chars(buf, buf + sizeof(buf), m(i, j));
      out.append(buf, r.ptr);
    }
    out += '\n';
  }
  return out;
}

namespace {

AssociationMatrix parse_matrix_binary(const std::string& bytes) {
  ByteReader in(bytes);
  if (!in.expect_magic(kMatrixMagic)) throw DataError("bad magic: not an AMX1 matrix file");
  const auto m = static_cast<Eigen::Index>(in.u32());
  const auto n = static_cast<Eigen::Index>(in.u32());
  const auto kind_byte = in.u8();
  if (kind_byte > 1) throw DataError("bad kind byte in matrix file");
  const auto kind = kind_byte == 1 ? ValueKind::Binary : ValueKind::Continuous;

  std::vector<std::string> task_ids(m), example_ids(n);
  for (auto& id : task_ids) id = in.str();
  for (auto& id : example_ids) id = in.str();

  Eigen::MatrixXd values(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) values(i, j) = in.f64();

  Mask observed(m, n);
  const auto total = static_cast<std::size_t>(m * n);
  const auto packed = in.bytes((total + 7) / 8);
  for (std::size_t k = 0; k < total; ++k) {
    const bool bit = (static_cast<unsigned char>(packed[k / 8]) >> (k % 8)) & 1U;
    observed(static_cast<Eigen::Index>(k) / n, static_cast<Eigen::Index>(k) % n) = bit;
  }
  if (!in.at_end()) throw DataError("trailing bytes after matrix payload");
  return AssociationMatrix(std::move(values), kind, std::move(task_ids), std::move(example_ids), std::move(observed));
}

std::string render_matrix_binary(const AssociationMatrix& m) {
  ByteWriter out;
  out.raw(std::string_view(kMatrixMagic, 4));
  out.u32(static_cast<std::uint32_t>(m.rows()));
  out.u32(static_cast<std::uint32_t>(m.cols()));
  out.u8(m.kind() == ValueKind::Binary ? 1 : 0);
  for (const auto& id : m.task_ids()) out.str(id);
  for (const auto& id : m.example_ids()) out.str(id);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.f64(m(i, j));

  const auto n = m.cols();
  const auto total = static_cast<std::size_t>(m.rows() * n);
  std::string packed((total + 7) / 8, '\0');
  for (std::size_t k = 0; k < total; ++k) {
    if (m.is_observed(static_cast<Eigen::Index>(k) / n, static_cast<Eigen::Index>(k) % n))
      packed[k / 8] = static_cast<char>(static_cast<unsigned char>(packed[k / 8]) | (1U << (k % 8)));
  }
  out.raw(packed);
  return std::move(out).take();
}

}  // namespace

AssociationMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format, std::optional<ValueKind> kind) {
  const std::string bytes = read_file(path);
  if (format == MatrixFormat::Csv) return parse_matrix_csv(bytes, kind.value_or(ValueKind::Continuous));
  auto m = parse_matrix_binary(bytes);
  if (kind && *kind != m.kind()) throw DataError("matrix file kind does not match the requested kind");
  return m;
}

void save_matrix(const AssociationMatrix& m, const std::filesystem::path& path, MatrixFormat format) {
  write_file(path, format == MatrixFormat::Csv ? render_matrix_csv(m) : render_matrix_binary(m));
}

std::vector<unsigned char> heatmap_pixels(const Eigen::MatrixXd& values, const Mask& observed, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("heatmap range requires lo < hi");
  std::vector<unsigned char> pixels(static_cast<std::size_t>(values.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j, ++k) {
      if (!observed(i, j)) {
        pixels[k] = 0;
        continue;
      }
      const double z = std::clamp(values(i, j), lo, hi);
      pixels[k] = static_cast<unsigned char>(std::lround(255.0 * (z - lo) / (hi - lo)));
    }
  }
  return pixels;
}

void export_heatmap(const AssociationMatrix& m, const std::filesystem::path& path, double lo, double hi) {
  const auto pixels = heatmap_pixels(m.values(), m.observed(), lo, hi);
  std::string out = "P5\n" + std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  write_file(path, out);
}

}  // namespace amnesia
