#pragma once

#include "amnesia/completion.hpp"
#include "amnesia/random.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace amnesia {

enum class Strategy { Random, GroundTruth, PredictedOffline, PredictedOnline, MirT, PplWindow, GradProd };

const char* to_string(Strategy s);
// Accepts the canonical names plus the short forms gt, mf-offline, mf-online, mir-t, ppl, grad-prod.
Strategy parse_strategy(const std::string& text);

// Replace: the event step trains on a replay batch instead of its task batch.
// Insert: the replay batch is an extra update right after the task batch.
enum class ReplayMode { Replace, Insert };

const char* to_string(ReplayMode m);
ReplayMode parse_replay_mode(const std::string& text);

struct ReplayPolicy {
  Strategy strategy = Strategy::Random;
  double temperature = 0.1;
  std::size_t batch_size = 8;
  std::size_t interval = 32;
  double online_warmup_fraction = 0.10;
  std::size_t mir_candidate_size = 64;
  double ppl_lo = 40.0;
  double ppl_hi = 60.0;
  ReplayMode mode = ReplayMode::Replace;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Softmax of scores/tau with max-shift.
std::vector<double> softmax_probabilities(std::span<const double> scores, double tau);

/// `batch` distinct indices; each draw is categorical over the items not yet
/// drawn with p_j proportional to exp(s_j / tau).
std::vector<std::size_t> sample_weighted(std::span<const double> scores, double tau, std::size_t batch, Rng& rng);

/// Top `batch` positions of the pool by score, ties to the lower pool index.
/// Returns the corresponding entries of `pool`.
std::vector<std::size_t> select_mir_t(std::span<const std::size_t> pool, std::span<const double> pool_scores,
                                      std::size_t batch);

/// Indices whose value v satisfies pct(lo) < v <= pct(hi), where pct(P) is the
/// nearest-rank percentile (value of rank ceil(P/100 * N)); lo = 0 admits all
/// values up to pct(hi).
std::vector<std::size_t> ppl_window_candidates(std::span<const double> ppl, double lo, double hi);
std::vector<std::size_t> select_ppl_window(std::span<const double> ppl, double lo, double hi, std::size_t batch,
                                           Rng& rng);

std::vector<std::size_t> select_grad_prod(std::span<const double> products, double tau, std::size_t batch, Rng& rng);

/// Steps s in [1, total_steps] with s % interval == 0.
std::vector<std::size_t> replay_steps(std::size_t total_steps, std::size_t interval);

// Forgetting measured against a fixed model state.
class ForgettingProbe {
 public:
  virtual ~ForgettingProbe() = default;
  virtual Eigen::VectorXd measure(std::span<const std::size_t> upstream) const = 0;
};

/// One fine-tuning run that the orchestrator can drive step by step.
/// Steps are numbered 1..total_steps().
class FineTuneSession {
 public:
  virtual ~FineTuneSession() = default;

  virtual std::size_t total_steps() const = 0;
  virtual std::size_t upstream_size() const = 0;
  // Upstream examples that are only ever evaluated.
  virtual const std::vector<std::size_t>& held_out() const = 0;

  // Back to the pretrained weights and the first task batch.
  virtual void reset() = 0;
  virtual void step(std::size_t s) = 0;
  virtual void replay(std::span<const std::size_t> upstream) = 0;

  // Loss increase of the current model over the pretrained one.
  virtual Eigen::VectorXd forgetting(std::span<const std::size_t> upstream) const = 0;
  virtual std::unique_ptr<ForgettingProbe> freeze() const = 0;

  // Pretrained-model loss per upstream example.
  virtual Eigen::VectorXd base_losses() const = 0;
  // Negated inner product of each upstream gradient with the task gradient,
  // both at the pretrained model.
  virtual Eigen::VectorXd gradient_products() const = 0;
};

// Full predicted forgetting row (length upstream_size) from seed forgetting.
using RowPredictor = std::function<Eigen::VectorXd(const SeedSet&)>;

struct ReplayEvent {
  std::size_t step = 0;
  std::string state;  // "warmup", "weighted", "uniform", ...
  std::vector<std::size_t> indices;
};

struct ReplayTrace {
  Strategy strategy = Strategy::Random;
  ReplayMode mode = ReplayMode::Replace;
  std::uint64_t seed = 0;
  std::size_t total_steps = 0;
  std::size_t passes = 1;
  std::vector<ReplayEvent> events;
  std::vector<std::size_t> seed_indices;
  std::vector<std::size_t> held_out;
  Eigen::VectorXd held_out_forgetting;
  double mean_held_out_forgetting = 0.0;
  std::string cost;           // symbolic, e.g. "2FT(Y) + EV(N)"
  std::string cost_resolved;  // with Y, N, S substituted

  std::size_t replayed_count() const;
  bool replays_any(std::span<const std::size_t> indices) const;
};

/// Symbolic cost of a strategy as fine-tuning (FT), upstream evaluation (EV)
/// and matrix completion (MC) units.
std::string cost_formula(Strategy s);

/// Runs one strategy end to end on `session`. `predictor` is required by the
/// predicted strategies and ignored otherwise.
ReplayTrace orchestrate(const ReplayPolicy& policy, FineTuneSession& session, const RowPredictor& predictor = {},
                        std::size_t seed_size = kDefaultSeedSize);

std::string render_trace_csv(const ReplayTrace& t);
std::string render_trace_json(const ReplayTrace& t, const ReplayPolicy& policy);

}  // namespace amnesia
