#pragma once

#include "amnesia/association_matrix.hpp"
#include "amnesia/completion.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>

namespace amnesia {

/// Precomputed embedding vectors keyed by task or example id.
class FeatureTable {
 public:
  FeatureTable(std::vector<std::string> ids, Eigen::MatrixXd vectors);

  std::size_t size() const { return ids_.size(); }
  Eigen::Index dim() const { return vectors_.cols(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Eigen::MatrixXd& vectors() const { return vectors_; }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  Eigen::VectorXd row(const std::string& id) const;
  // Stacks rows for `ids` in order; throws DataError naming the first missing id.
  Eigen::MatrixXd gather(const std::vector<std::string>& ids) const;

 private:
  std::vector<std::string> ids_;
  Eigen::MatrixXd vectors_;
  std::unordered_map<std::string, Eigen::Index> index_;
};

// CSV rows `id,v1,...,vd`; an optional header whose first cell is "id" is skipped.
FeatureTable load_feature_table(const std::filesystem::path& path);
FeatureTable parse_feature_table(std::string_view text);
void save_feature_table(const FeatureTable& t, const std::filesystem::path& path);

/// Mean of the per-example vectors of one task's training examples.
Eigen::VectorXd mean_feature(const FeatureTable& per_example, const std::vector<std::string>& example_ids);

struct FeatureModelConfig {
  int hidden = 128;
  int output = 64;
  int epochs = 2000;
  double learning_rate = 3e-3;  // Adam
  std::uint64_t seed = 0;
};

/// Two small towers (linear -> ReLU -> linear), one for task vectors and one
/// for example vectors; forgetting is regressed onto the inner product of the
/// two tower outputs. The task tower's output layer starts at zero.
class FeatureRegressor {
 public:
  explicit FeatureRegressor(FeatureModelConfig cfg = {}) : cfg_(cfg) {}

  // Trains on targets(i, j) over the observed mask (all entries when absent).
  void fit(const Eigen::MatrixXd& task_vectors, const Eigen::MatrixXd& example_vectors, const Eigen::MatrixXd& targets,
           const std::optional<Mask>& observed = std::nullopt);

  Eigen::VectorXd predict_row(const Eigen::VectorXd& task_vector) const;
  Eigen::MatrixXd predict(const Eigen::MatrixXd& task_vectors) const;

  double final_loss() const { return final_loss_; }

 private:
  struct Tower {
    Eigen::MatrixXd w1, w2;
    Eigen::VectorXd b1, b2;
  };
  static Eigen::MatrixXd forward(const Tower& t, const Eigen::MatrixXd& x, Eigen::MatrixXd* pre = nullptr);

  FeatureModelConfig cfg_;
  Tower task_;
  Tower example_;
  Eigen::MatrixXd example_out_;  // cached example tower output, N x output
  double final_loss_ = 0.0;
};

RowPrediction predict_features(const AssociationMatrix& train, const FeatureTable& task_feats,
                               const FeatureTable& example_feats, const std::string& new_task_id,
                               const FeatureModelConfig& cfg = {});

enum class ResidualBase { Additive, MF };

/// Completion prediction plus a feature model trained on the completion
/// model's residuals over the training rows.
RowPrediction predict_residual(const AssociationMatrix& train, const SeedSet& seed, const FeatureTable& task_feats,
                               const FeatureTable& example_feats, const std::string& new_task_id, ResidualBase base,
                               const FeatureModelConfig& cfg = {}, const MfOptions& mf = {});

}  // namespace amnesia
