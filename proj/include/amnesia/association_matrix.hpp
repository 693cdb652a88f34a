#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace amnesia {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class ValueKind { Continuous, Binary };

const char* to_string(ValueKind kind);
ValueKind parse_value_kind(const std::string& text);

// Raised when input data violates a structural invariant (bad ids, bad
// values, malformed files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Task-by-example forgetting record. Row i holds the forgetting measured on
/// every upstream example after fine-tuning on task i. Unobserved entries are
/// stored as 0.0 and must be ignored through the mask.
///
/// Immutable after construction; safe to share read-only between threads.
class AssociationMatrix {
 public:
  AssociationMatrix(Eigen::MatrixXd values, ValueKind kind, std::vector<std::string> task_ids,
                    std::vector<std::string> example_ids, std::optional<Mask> observed = std::nullopt);

  // Convenience constructor with generated ids "task_<i>" / "ex_<j>".
  static AssociationMatrix from_values(Eigen::MatrixXd values, ValueKind kind = ValueKind::Continuous);

  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }
  const Eigen::MatrixXd& values() const { return values_; }
  const Mask& observed() const { return observed_; }
  ValueKind kind() const { return kind_; }
  const std::vector<std::string>& task_ids() const { return task_ids_; }
  const std::vector<std::string>& example_ids() const { return example_ids_; }

  bool fully_observed() const { return observed_count_ == values_.size(); }
  Eigen::Index observed_count() const { return observed_count_; }
  bool is_observed(Eigen::Index i, Eigen::Index j) const { return observed_(i, j); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

  std::optional<Eigen::Index> task_index(const std::string& id) const;

  AssociationMatrix select_rows(std::span<const Eigen::Index> rows) const;
  AssociationMatrix with_mask(Mask observed) const;

 private:
  Eigen::MatrixXd values_;
  ValueKind kind_;
  std::vector<std::string> task_ids_;
  std::vector<std::string> example_ids_;
  Mask observed_;
  Eigen::Index observed_count_ = 0;
};

/// Per-example performance of one model on the upstream set: log perplexity
/// (nats) for continuous kind, 0/1 exact match for binary kind.
struct PerformanceSnapshot {
  std::vector<std::string> example_ids;
  Eigen::VectorXd scores;
  ValueKind kind = ValueKind::Continuous;

  void validate() const;
};

/// Forgetting of every example between two snapshots. Continuous: after -
/// before, sign kept. Binary: 1 where an example flipped correct -> incorrect.
Eigen::VectorXd build_row(const PerformanceSnapshot& before, const PerformanceSnapshot& after);

// Throws DataError on duplicate ids.
void check_unique_ids(const std::vector<std::string>& ids, const char* what);

}  // namespace amnesia
