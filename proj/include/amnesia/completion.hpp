#pragma once

#include "amnesia/association_matrix.hpp"
#include "amnesia/lowrank.hpp"
#include "amnesia/random.hpp"
#include "amnesia/stats.hpp"

#include <string>
#include <vector>

namespace amnesia {

/// Known forgetting of a new task on a small set of upstream examples.
struct SeedSet {
  std::vector<Eigen::Index> indices;
  Eigen::VectorXd values;

  std::size_t size() const { return indices.size(); }
  void validate(Eigen::Index columns) const;

  /// Draws `size` distinct columns uniformly from the observed entries of `row`.
  static SeedSet draw(const Eigen::VectorXd& row, std::size_t size, Rng& rng);
};

inline constexpr std::size_t kDefaultSeedSize = 30;

struct RowPrediction {
  Eigen::VectorXd values;
  std::vector<std::string> notes;  // fallbacks and warnings taken on the way
};

// Copies the seed's known values into their columns.
void overwrite_seed(Eigen::VectorXd& row, const SeedSet& seed);

/// z_ij ~ a_i + b_j fitted on the training rows; a new task's offset is the
/// mean of (seed value - b_j) over the seed.
class AdditiveCompleter {
 public:
  explicit AdditiveCompleter(const AssociationMatrix& train);
  RowPrediction predict(const SeedSet& seed) const;
  const Eigen::VectorXd& example_bias() const { return example_bias_; }
  Eigen::MatrixXd train_fit() const;

 private:
  FactorModel model_;
  Eigen::VectorXd example_bias_;
};

struct KnnOptions {
  int k = 5;
  stats::Correlation similarity = stats::Correlation::Pearson;
};

/// Similarity-weighted mean of the k training rows whose seed-column values
/// correlate best with the new task's seed. Exact duplicate training rows are
/// merged first, so repeating a row never changes a prediction.
class KnnCompleter {
 public:
  KnnCompleter(const AssociationMatrix& train, KnnOptions options = {});
  RowPrediction predict(const SeedSet& seed) const;
  std::size_t distinct_rows() const { return static_cast<std::size_t>(rows_.rows()); }

 private:
  Eigen::MatrixXd rows_;
  KnnOptions options_;
};

struct MfOptions {
  int rank = 5;
  double lambda = 1e-3;
  FitConfig fit;  // used when the training matrix needs gradient fitting
  int newton_max_iterations = 100;
  double newton_tolerance = 1e-8;
};

/// Example factors learned from the training rows; a new task's factor is
/// folded in by ridge regression on the seed (Newton's method on the
/// regularized cross-entropy for binary matrices). Task factors are rescaled
/// to unit RMS per component so the ridge penalty acts on a fixed scale.
class MfCompleter {
 public:
  MfCompleter(const AssociationMatrix& train, MfOptions options = {});
  RowPrediction predict(const SeedSet& seed) const;
  Eigen::VectorXd fold_in(const SeedSet& seed) const;

  const FactorModel& model() const { return model_; }
  Eigen::MatrixXd train_fit() const { return model_.predict(); }
  int rank() const { return model_.rank(); }

 private:
  FactorModel model_;
  MfOptions options_;
  std::vector<std::string> fit_notes_;
};

RowPrediction predict_additive(const AssociationMatrix& train, const SeedSet& seed);
RowPrediction predict_knn(const AssociationMatrix& train, const SeedSet& seed, int k = 5,
                          stats::Correlation similarity = stats::Correlation::Pearson);
RowPrediction predict_mf(const AssociationMatrix& train, const SeedSet& seed, int rank = 5, double lambda = 1e-3);

}  // namespace amnesia
