#include "amnesia/factor_model_io.hpp"

#include "amnesia/matrix_io.hpp"
#include "byte_io.hpp"

#include <json.hpp>

namespace amnesia {

namespace {

constexpr char kModelMagic[4] = {'F', 'M', 'X', '1'};

void write_table(ByteWriter& out, const Eigen::MatrixXd& t) {
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index k = 0; k < t.cols(); ++k) out.f64(t(i, k));
}

Eigen::MatrixXd read_table(ByteReader& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd t(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) t(i, k) = in.f64();
  return t;
}

nlohmann::json table_json(const Eigen::MatrixXd& t) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < t.cols(); ++k) row.push_back(t(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd table_from_json(const nlohmann::json& j, Eigen::Index cols) {
  Eigen::MatrixXd t(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) throw DataError("factor table row has wrong width");
    for (Eigen::Index k = 0; k < cols; ++k) t(static_cast<Eigen::Index>(i), k) = j[i][k].get<double>();
  }
  return t;
}

}  // namespace

std::string encode_factor_model(const FactorModel& f) {
  f.validate();
  ByteWriter out;
  out.raw(std::string_view(kModelMagic, 4));
  out.u32(static_cast<std::uint32_t>(f.rank()));
  out.u8(f.link == Link::Logistic ? 1 : 0);
  out.u32(static_cast<std::uint32_t>(f.tasks()));
  out.u32(static_cast<std::uint32_t>(f.examples()));
  out.u8(static_cast<std::uint8_t>((f.task_bias ? 1 : 0) | (f.example_bias ? 2 : 0)));
  write_table(out, f.task_factors);
  write_table(out, f.example_factors);
  if (f.task_bias) write_table(out, *f.task_bias);
  if (f.example_bias) write_table(out, *f.example_bias);
  return std::move(out).take();
}

FactorModel decode_factor_model(std::string_view bytes) {
  ByteReader in(bytes);
  if (!in.expect_magic(kModelMagic)) throw DataError("bad magic: not an FMX1 factor model");
  const auto rank = static_cast<Eigen::Index>(in.u32());
  const auto link = in.u8();
  if (link > 1) throw DataError("bad link byte in factor model");
  const auto rows = static_cast<Eigen::Index>(in.u32());
  const auto cols = static_cast<Eigen::Index>(in.u32());
  const auto flags = in.u8();
  if (flags > 3) throw DataError("bad bias flags in factor model");

  FactorModel f;
  f.link = link == 1 ? Link::Logistic : Link::Identity;
  f.task_factors = read_table(in, rows, rank);
  f.example_factors = read_table(in, cols, rank);
  if (flags & 1) f.task_bias = read_table(in, rows, 1).col(0);
  if (flags & 2) f.example_bias = read_table(in, cols, 1).col(0);
  if (!in.at_end()) throw DataError("trailing bytes after factor model payload");
  return f;
}

void save_factor_model(const FactorModel& f, const std::filesystem::path& path) {
  write_file(path, encode_factor_model(f));
}

FactorModel load_factor_model(const std::filesystem::path& path) { return decode_factor_model(read_file(path)); }

std::string factor_model_to_json(const FactorModel& f) {
  f.validate();
  nlohmann::json j;
  j["format"] = "FMX1";
  j["rank"] = f.rank();
  j["link"] = to_string(f.link);
  j["tasks"] = f.tasks();
  j["examples"] = f.examples();
  j["task_factors"] = table_json(f.task_factors);
  j["example_factors"] = table_json(f.example_factors);
  if (f.task_bias) j["task_bias"] = std::vector<double>(f.task_bias->begin(), f.task_bias->end());
  if (f.example_bias) j["example_bias"] = std::vector<double>(f.example_bias->begin(), f.example_bias->end());
  return j.dump(2);
}

FactorModel factor_model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  FactorModel f;
  const auto rank = j.at("rank").get<Eigen::Index>();
  f.link = parse_link(j.at("link").get<std::string>());
  f.task_factors = table_from_json(j.at("task_factors"), rank);
  f.example_factors = table_from_json(j.at("example_factors"), rank);
  if (f.task_factors.rows() != j.at("tasks").get<Eigen::Index>() ||
      f.example_factors.rows() != j.at("examples").get<Eigen::Index>())
    throw DataError("factor table lengths disagree with declared dimensions");
  auto vec = [](const nlohmann::json& a) {
    const auto v = a.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  if (j.contains("task_bias")) f.task_bias = vec(j["task_bias"]);
  if (j.contains("example_bias")) f.example_bias = vec(j["example_bias"]);
  f.validate();
  return f;
}

}  // namespace amnesia
