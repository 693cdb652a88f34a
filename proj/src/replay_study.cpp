#include "amnesia/replay_study.hpp"

#include "amnesia/matrix_io.hpp"
#include "amnesia/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace amnesia {

const char* to_string(TaskPool p) {
  switch (p) {
    case TaskPool::Overlap: return "overlap";
    case TaskPool::Disjoint: return "disjoint";
    case TaskPool::Both: return "both";
  }
  return "?";
}

TaskPool parse_task_pool(const std::string& text) {
  if (text == "overlap") return TaskPool::Overlap;
  if (text == "disjoint") return TaskPool::Disjoint;
  if (text == "both") return TaskPool::Both;
  throw std::invalid_argument("unknown task pool '" + text + "'");
}

void ReplayStudyConfig::validate() const {
  oracle.validate();
  policy.validate();
  if (strategies.empty()) throw std::invalid_argument("no replay strategies selected");
  if (tasks < 2) throw std::invalid_argument("a replay study needs at least 2 evaluation tasks");
  if (held_out < 1) throw std::invalid_argument("held-out set must not be empty");
}

const StrategyOutcome* ReplayStudy::find(Strategy s) const {
  for (const auto& o : outcomes)
    if (o.strategy == s) return &o;
  return nullptr;
}

namespace {

struct PoolTask {
  double angle;
  int stream;
  std::size_t index;
};

}  // namespace

ReplayStudy run_replay_study(const ReplayStudyConfig& cfg) {
  cfg.validate();
  const OracleConfig& oc = cfg.oracle;

  std::vector<PoolTask> pool;
  auto add = [&](std::vector<double> angles, int stream) {
    std::sort(angles.begin(), angles.end());
    for (std::size_t i = 0; i < angles.size(); ++i) pool.push_back({angles[i], stream, i});
  };
  if (cfg.pool != TaskPool::Disjoint) add(oc.overlap_angles, 1);
  if (cfg.pool != TaskPool::Overlap) add(oc.disjoint_angles, 2);
  std::sort(pool.begin(), pool.end(), [](const PoolTask& a, const PoolTask& b) { return a.angle < b.angle; });
  if (pool.size() < cfg.tasks + 2)
    throw std::invalid_argument("task pool of " + std::to_string(pool.size()) + " is too small for " +
                                std::to_string(cfg.tasks) + " evaluation tasks plus predictor training rows");

  // Evaluation tasks spread evenly over the pool; the rest train the predictor.
  std::vector<char> is_eval(pool.size(), 0);
  for (std::size_t k = 0; k < cfg.tasks; ++k) is_eval[(2 * k + 1) * pool.size() / (2 * cfg.tasks)] = 1;

  const Dataset base = base_dataset(oc);
  const Pretrained pre = pretrain(oc, base);
  const std::size_t n = pre.upstream_size();
  if (cfg.held_out >= n) throw std::invalid_argument("held-out set must be smaller than the upstream set");

  ReplayStudy study;
  study.pretrained_fingerprint = pre.net.fingerprint();
  Rng held_rng(derive_seed(oc.master_seed, 0x401d));
  study.held_out = held_rng.sample_without_replacement(n, cfg.held_out);
  std::sort(study.held_out.begin(), study.held_out.end());

  std::vector<PoolTask> eval, train;
  for (std::size_t i = 0; i < pool.size(); ++i) (is_eval[i] ? eval : train).push_back(pool[i]);
  for (const auto& t : eval) study.eval_angles.push_back(t.angle);
  for (const auto& t : train) study.train_angles.push_back(t.angle);

  auto shuffle_seed = [&](const PoolTask& t) {
    return derive_seed(oc.master_seed, 200 + static_cast<std::uint64_t>(t.stream), t.index);
  };

  const bool needs_predictor = std::any_of(cfg.strategies.begin(), cfg.strategies.end(), [](Strategy s) {
    return s == Strategy::PredictedOffline || s == Strategy::PredictedOnline;
  });
  std::optional<MfCompleter> completer;
  if (needs_predictor) {
    Eigen::MatrixXd z(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(n));
    std::vector<std::string> ids;
    for (const auto& t : train) ids.push_back(task_id_for(t.angle));
    parallel_for(train.size(), oc.jobs, [&](std::size_t i) {
      const RotationTask task = make_task(oc, base, train[i].angle, train[i].stream, train[i].index);
      z.row(static_cast<Eigen::Index>(i)) = finetune_and_measure(pre, task, oc, shuffle_seed(train[i])).transpose();
    });
    completer.emplace(AssociationMatrix(std::move(z), ValueKind::Continuous, std::move(ids), pre.snapshot.example_ids),
                      cfg.mf);
  }
  RowPredictor predictor;
  if (completer) predictor = [&](const SeedSet& seed) { return completer->predict(seed).values; };

  const std::size_t runs = eval.size() * (cfg.strategies.size() + 1);
  std::vector<ReplayTrace> traces(runs);
  std::vector<double> baseline(eval.size());
  parallel_for(runs, oc.jobs, [&](std::size_t job) {
    const std::size_t t = job / (cfg.strategies.size() + 1);
    const std::size_t k = job % (cfg.strategies.size() + 1);
    RotationTask task = make_task(oc, base, eval[t].angle, eval[t].stream, eval[t].index);
    SynthSession session(pre, std::move(task), oc, study.held_out, shuffle_seed(eval[t]));
    if (k == cfg.strategies.size()) {
      session.reset();
      for (std::size_t s = 1; s <= session.total_steps(); ++s) session.step(s);
      baseline[t] = session.forgetting(study.held_out).mean();
      return;
    }
    ReplayPolicy policy = cfg.policy;
    policy.strategy = cfg.strategies[k];
    policy.seed = derive_seed(cfg.policy.seed, t, k);
    traces[job] = orchestrate(policy, session, predictor, cfg.seed_size);
  });
  study.no_replay = baseline;

  for (std::size_t k = 0; k < cfg.strategies.size(); ++k) {
    StrategyOutcome o;
    o.strategy = cfg.strategies[k];
    for (std::size_t t = 0; t < eval.size(); ++t) {
      auto& trace = traces[t * (cfg.strategies.size() + 1) + k];
      o.per_task.push_back(trace.mean_held_out_forgetting);
      o.traces.push_back(std::move(trace));
    }
    o.mean = std::accumulate(o.per_task.begin(), o.per_task.end(), 0.0) / static_cast<double>(o.per_task.size());
    study.outcomes.push_back(std::move(o));
  }
  if (const auto* random = study.find(Strategy::Random)) {
    const std::vector<double> reference = random->per_task;
    for (auto& o : study.outcomes) {
      if (o.strategy == Strategy::Random) continue;
      try {
        o.vs_random = stats::paired_t_test(o.per_task, reference);
      } catch (const std::domain_error&) {
        // identical per-task values: no test
      }
    }
  }
  return study;
}

std::string render_study_csv(const ReplayStudy& s) {
  std::string out = "strategy,mean_forgetting,mean_diff_vs_random,t,p_two_sided,significance\n";
  for (const auto& o : s.outcomes) {
    out += std::string(to_string(o.strategy)) + "," + format_double(o.mean) + ",";
    if (o.vs_random) {
      const double diff = o.mean - s.find(Strategy::Random)->mean;
      const double p = o.vs_random->p_two_sided;
      // "*" p < 0.05, "**" p < 0.01, only for improvements over random.
      const std::string mark = diff < 0 && p < 0.01 ? "**" : diff < 0 && p < 0.05 ? "*" : "";
      out += format_double(diff) + "," + format_double(o.vs_random->t) + "," + format_double(p) + "," + mark;
    } else {
      out += ",,,";
    }
    out += '\n';
  }
  return out;
}

std::string render_study_tasks_csv(const ReplayStudy& s) {
  std::string out = "task_angle,no_replay";
  for (const auto& o : s.outcomes) out += std::string(",") + to_string(o.strategy);
  out += '\n';
  for (std::size_t t = 0; t < s.eval_angles.size(); ++t) {
    out += format_double(s.eval_angles[t]) + "," + format_double(s.no_replay[t]);
    for (const auto& o : s.outcomes) out += "," + format_double(o.per_task[t]);
    out += '\n';
  }
  return out;
}

}  // namespace amnesia
