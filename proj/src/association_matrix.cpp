#include "amnesia/association_matrix.hpp"

#include <cmath>
#include <unordered_set>

namespace amnesia {

const char* to_string(ValueKind kind) {
  return kind == ValueKind::Binary ? "binary" : "continuous";
}

ValueKind parse_value_kind(const std::string& text) {
  if (text == "continuous") return ValueKind::Continuous;
  if (text == "binary") return ValueKind::Binary;
  throw std::invalid_argument("unknown value kind '" + text + "' (expected continuous|binary)");
}

void check_unique_ids(const std::vector<std::string>& ids, const char* what) {
  std::unordered_set<std::string> seen;
  seen.reserve(ids.size());
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw DataError(std::string("duplicate ") + what + " id '" + id + "'");
  }
}

AssociationMatrix::AssociationMatrix(Eigen::MatrixXd values, ValueKind kind, std::vector<std::string> task_ids,
                                     std::vector<std::string> example_ids, std::optional<Mask> observed)
    : values_(std::move(values)),
      kind_(kind),
      task_ids_(std::move(task_ids)),
      example_ids_(std::move(example_ids)) {
  if (values_.rows() < 1 || values_.cols() < 1) throw DataError("association matrix must be at least 1x1");
  if (static_cast<Eigen::Index>(task_ids_.size()) != values_.rows())
    throw DataError("task id count does not match row count");
  if (static_cast<Eigen::Index>(example_ids_.size()) != values_.cols())
    throw DataError("example id count does not match column count");
  check_unique_ids(task_ids_, "task");
  check_unique_ids(example_ids_, "example");

  if (observed) {
    if (observed->rows() != values_.rows() || observed->cols() != values_.cols())
      throw DataError("observation mask shape does not match values");
    observed_ = std::move(*observed);
  } else {
    observed_ = Mask::Constant(values_.rows(), values_.cols(), true);
  }

  for (Eigen::Index j = 0; j < values_.cols(); ++j) {
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      if (!observed_(i, j)) {
        values_(i, j) = 0.0;
        continue;
      }
      ++observed_count_;
      const double v = values_(i, j);
      if (!std::isfinite(v)) throw DataError("non-finite observed value");
      if (kind_ == ValueKind::Binary && v != 0.0 && v != 1.0)
        throw DataError("binary association matrix holds a value outside {0,1}");
    }
  }
}

AssociationMatrix AssociationMatrix::from_values(Eigen::MatrixXd values, ValueKind kind) {
  std::vector<std::string> tasks(values.rows()), examples(values.cols());
  for (Eigen::Index i = 0; i < values.rows(); ++i) tasks[i] = "task_" + std::to_string(i);
  for (Eigen::Index j = 0; j < values.cols(); ++j) examples[j] = "ex_" + std::to_string(j);
  return AssociationMatrix(std::move(values), kind, std::move(tasks), std::move(examples));
}

std::optional<Eigen::Index> AssociationMatrix::task_index(const std::string& id) const {
  for (std::size_t i = 0; i < task_ids_.size(); ++i)
    if (task_ids_[i] == id) return static_cast<Eigen::Index>(i);
  return std::nullopt;
}

AssociationMatrix AssociationMatrix::select_rows(std::span<const Eigen::Index> rows) const {
  Eigen::MatrixXd v(rows.size(), cols());
  Mask m(rows.size(), cols());
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= this->rows()) throw std::out_of_range("row index out of range");
    v.row(r) = values_.row(rows[r]);
    m.row(r) = observed_.row(rows[r]);
    ids.push_back(task_ids_[rows[r]]);
  }
  return AssociationMatrix(std::move(v), kind_, std::move(ids), example_ids_, std::move(m));
}

AssociationMatrix AssociationMatrix::with_mask(Mask observed) const {
  return AssociationMatrix(values_, kind_, task_ids_, example_ids_, std::move(observed));
}

void PerformanceSnapshot::validate() const {
  if (static_cast<Eigen::Index>(example_ids.size()) != scores.size())
    throw DataError("snapshot id count does not match score count");
  check_unique_ids(example_ids, "example");
  if (kind == ValueKind::Binary) {
    for (Eigen::Index j = 0; j < scores.size(); ++j)
      if (scores[j] != 0.0 && scores[j] != 1.0) throw DataError("binary snapshot score outside {0,1}");
  }
}

Eigen::VectorXd build_row(const PerformanceSnapshot& before, const PerformanceSnapshot& after) {
  before.validate();
  after.validate();
  if (before.kind != after.kind) throw DataError("snapshot kinds differ");
  if (before.example_ids != after.example_ids) throw DataError("snapshot example ids differ");

  if (before.kind == ValueKind::Continuous) return after.scores - before.scores;

  Eigen::VectorXd row(before.scores.size());
  for (Eigen::Index j = 0; j < row.size(); ++j)
    row[j] = (before.scores[j] == 1.0 && after.scores[j] == 0.0) ? 1.0 : 0.0;
  return row;
}

}  // namespace amnesia
