#pragma once

#include "amnesia/completion.hpp"
#include "amnesia/feature_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace amnesia {

enum class Regime { InDomain, OutOfDomain };

const char* to_string(Regime regime);
Regime parse_regime(const std::string& text);

struct SplitSpec {
  std::vector<std::string> train_tasks;
  std::vector<std::string> test_tasks;
  Regime regime = Regime::InDomain;
  std::size_t seed_size = kDefaultSeedSize;
  std::size_t repeats = 10;

  void validate() const;
};

enum class Method { Additive, Knn, Mf, Features, ResidualAdditive, ResidualMf };

const char* to_string(Method method);
Method parse_method(const std::string& text);

struct EvalParams {
  KnnOptions knn;
  MfOptions mf;
  FeatureModelConfig features;
  const FeatureTable* task_features = nullptr;     // required by feature methods
  const FeatureTable* example_features = nullptr;  // required by feature methods
  std::uint64_t master_seed = 0;
  std::size_t jobs = 1;
};

struct TaskScore {
  std::string task_id;
  std::vector<double> per_repeat;
  double mean = 0.0;
  double sd = 0.0;
};

/// RMSE for continuous matrices, F1 for binary ones, both multiplied by
/// `scale` (100) so they read on the same scale as percentage tables.
struct EvalReport {
  Method method = Method::Mf;
  std::string metric;
  double scale = 100.0;
  Regime regime = Regime::InDomain;
  std::size_t seed_size = 0;
  std::size_t repeats = 0;
  std::uint64_t master_seed = 0;
  std::vector<TaskScore> tasks;
  double mean = 0.0;
  double sd = 0.0;
  std::vector<std::string> notes;
};

/// Scores `method` on every test task: for each repeat, a seed of columns is
/// drawn (stream derived from master seed, task, repeat), the remaining
/// columns are predicted and scored. Seed columns never enter the score.
EvalReport evaluate_protocol(const AssociationMatrix& m, const SplitSpec& split, Method method,
                             const EvalParams& params = {});

/// RMSE over observed, non-seed columns of `truth`, unscaled.
double score_rmse(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted, const SeedSet& seed,
                  const Mask* observed_row = nullptr);
double score_f1(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted, const SeedSet& seed,
                const Mask* observed_row = nullptr);

std::string render_eval_csv(const EvalReport& r);
std::string render_eval_json(const EvalReport& r, const EvalParams& params);

}  // namespace amnesia
