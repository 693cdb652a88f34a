#pragma once

#include "amnesia/oracle.hpp"
#include "amnesia/stats.hpp"

#include <optional>

namespace amnesia {

enum class TaskPool { Overlap, Disjoint, Both };

const char* to_string(TaskPool p);
TaskPool parse_task_pool(const std::string& text);

/// Replay comparison on the oracle: every strategy runs on the same
/// evaluation tasks from the same pretrained model; the predicted strategies
/// learn from forgetting rows of the remaining tasks.
struct ReplayStudyConfig {
  OracleConfig oracle;
  std::vector<Strategy> strategies{Strategy::Random, Strategy::GroundTruth, Strategy::PredictedOffline};
  ReplayPolicy policy;  // strategy is set per run
  TaskPool pool = TaskPool::Both;
  std::size_t tasks = 8;
  std::size_t held_out = 1000;
  std::size_t seed_size = kDefaultSeedSize;
  MfOptions mf;

  void validate() const;
};

struct StrategyOutcome {
  Strategy strategy = Strategy::Random;
  std::vector<double> per_task;  // mean held-out forgetting
  double mean = 0.0;
  std::optional<stats::TTestResult> vs_random;  // paired over tasks, strategy minus random
  std::vector<ReplayTrace> traces;
};

struct ReplayStudy {
  std::vector<double> eval_angles;
  std::vector<double> train_angles;
  std::vector<std::size_t> held_out;
  std::vector<double> no_replay;  // held-out forgetting without replay, per task
  std::vector<StrategyOutcome> outcomes;
  std::uint64_t pretrained_fingerprint = 0;

  const StrategyOutcome* find(Strategy s) const;
};

ReplayStudy run_replay_study(const ReplayStudyConfig& cfg);

std::string render_study_csv(const ReplayStudy& s);
std::string render_study_tasks_csv(const ReplayStudy& s);

}  // namespace amnesia
