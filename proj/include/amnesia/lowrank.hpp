#pragma once

#include "amnesia/association_matrix.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace amnesia {

enum class Link { Identity, Logistic };

const char* to_string(Link link);
Link parse_link(const std::string& text);

inline double sigmoid(double u) {
  return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

/// Rank-r factorization of an association matrix:
///   z_ij ~ link(sum_k alpha_ik * beta_jk + task_bias_i + example_bias_j).
/// Rank 0 with both biases present encodes the additive model.
struct FactorModel {
  Eigen::MatrixXd task_factors;     // M x r, row i = alpha_i
  Eigen::MatrixXd example_factors;  // N x r, row j = beta_j
  Link link = Link::Identity;
  std::optional<Eigen::VectorXd> task_bias;
  std::optional<Eigen::VectorXd> example_bias;

  int rank() const { return static_cast<int>(task_factors.cols()); }
  Eigen::Index tasks() const { return task_factors.rows(); }
  Eigen::Index examples() const { return example_factors.rows(); }

  // Pre-link scores.
  Eigen::MatrixXd linear_predictor() const;
  Eigen::MatrixXd predict() const;

  void validate() const;
};

struct FitConfig {
  int epochs = 1000;
  double learning_rate = 0.05;
  double init_scale = 0.1;  // factor init stddev is init_scale / sqrt(rank)
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  Link link = Link::Identity;
  bool use_bias = false;
};

struct FitReport {
  double r2 = 0.0;
  std::optional<double> f1;
  double frobenius_error = 0.0;
  int epochs_run = 0;
  double final_objective = 0.0;
};

struct GdFit {
  FactorModel model;
  FitReport report;
  std::vector<double> objective_trace;  // objective after each epoch, index 0 = initial
};

class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Truncated SVD: the exact Frobenius-optimal rank-r approximation of a fully
/// observed continuous matrix. task_factors = U_r * S_r, example_factors = V_r,
/// components ordered by descending singular value.
FactorModel fit_svd(const AssociationMatrix& m, int rank);

/// Singular values of a fully observed matrix, descending.
Eigen::VectorXd singular_values(const AssociationMatrix& m);

/// Full-batch gradient descent over the observed entries. Squared error for the
/// identity link, cross-entropy for the logistic link. Each parameter row moves
/// along its per-row (per-column) mean gradient; a step that would raise the
/// objective is halved until it does not.
GdFit fit_gd(const AssociationMatrix& m, int rank, const FitConfig& cfg = {});

/// Least-squares additive model z_ij ~ a_i + b_j over observed entries, solved
/// by alternating means. Gauge: mean(example_bias) == 0.
FactorModel fit_additive(const AssociationMatrix& m, double tolerance = 1e-10, int max_iterations = 1'000'000);

/// R^2 against the global observed mean; F1 (positive class = forgotten,
/// threshold 0.5) for binary matrices. Throws when observed values have zero
/// variance.
FitReport goodness_of_fit(const AssociationMatrix& m, const FactorModel& f);

double r_squared(const AssociationMatrix& m, const Eigen::MatrixXd& predicted);
double f1_score(std::span<const double> truth, std::span<const double> predicted, double threshold = 0.5);

/// SVD path when the matrix is continuous and fully observed (one
/// decomposition, truncated per rank); gradient descent otherwise, with the
/// logistic link forced for binary matrices.
std::vector<std::pair<int, FitReport>> rank_sweep(const AssociationMatrix& m, std::span<const int> ranks,
                                                  const FitConfig& cfg = {});

/// k-th outer product alpha_k beta_k^T, 1-based.
Eigen::MatrixXd component(const FactorModel& f, int k);

}  // namespace amnesia
