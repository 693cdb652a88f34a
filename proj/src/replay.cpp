#include "amnesia/replay.hpp"

#include "amnesia/matrix_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace amnesia {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Random: return "random";
    case Strategy::GroundTruth: return "ground-truth";
    case Strategy::PredictedOffline: return "predicted-offline";
    case Strategy::PredictedOnline: return "predicted-online";
    case Strategy::MirT: return "mir-t";
    case Strategy::PplWindow: return "ppl-window";
    case Strategy::GradProd: return "grad-prod";
  }
  return "?";
}

Strategy parse_strategy(const std::string& text) {
  if (text == "gt") return Strategy::GroundTruth;
  if (text == "mf-offline" || text == "offline") return Strategy::PredictedOffline;
  if (text == "mf-online" || text == "online") return Strategy::PredictedOnline;
  if (text == "ppl") return Strategy::PplWindow;
  if (text == "mir") return Strategy::MirT;
  for (auto s : {Strategy::Random, Strategy::GroundTruth, Strategy::PredictedOffline, Strategy::PredictedOnline,
                 Strategy::MirT, Strategy::PplWindow, Strategy::GradProd})
    if (text == to_string(s)) return s;
  throw std::invalid_argument("unknown replay strategy '" + text + "'");
}

const char* to_string(ReplayMode m) { return m == ReplayMode::Insert ? "insert" : "replace"; }

ReplayMode parse_replay_mode(const std::string& text) {
  if (text == "replace") return ReplayMode::Replace;
  if (text == "insert") return ReplayMode::Insert;
  throw std::invalid_argument("unknown replay mode '" + text + "'");
}

void ReplayPolicy::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw std::invalid_argument("temperature must be > 0");
  if (interval < 1) throw std::invalid_argument("replay interval must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("replay batch size must be >= 1");
  if (!(online_warmup_fraction > 0.0 && online_warmup_fraction < 1.0))
    throw std::invalid_argument("online warmup fraction must lie in (0, 1)");
  if (!(ppl_lo >= 0.0 && ppl_hi <= 100.0 && ppl_lo < ppl_hi))
    throw std::invalid_argument("perplexity window needs 0 <= lo < hi <= 100");
  if (strategy == Strategy::MirT && mir_candidate_size < batch_size)
    throw std::invalid_argument("MIR-T candidate pool must hold at least one batch");
}

std::vector<double> softmax_probabilities(std::span<const double> scores, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (scores.empty()) return {};
  double hi = -std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("replay scores must be finite");
    hi = std::max(hi, s);
  }
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) total += p[j] = std::exp((scores[j] - hi) / tau);
  for (double& v : p) v /= total;
  return p;
}

std::vector<std::size_t> sample_weighted(std::span<const double> scores, double tau, std::size_t batch, Rng& rng) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (batch > scores.size()) throw std::invalid_argument("replay batch larger than the candidate set");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("replay scores must be finite");

  std::vector<std::size_t> remaining(scores.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(batch);
  std::vector<double> w(scores.size());
  for (std::size_t draw = 0; draw < batch; ++draw) {
    double hi = -std::numeric_limits<double>::infinity();
    for (auto j : remaining) hi = std::max(hi, scores[j]);
    double total = 0.0;
    for (std::size_t k = 0; k < remaining.size(); ++k) total += w[k] = std::exp((scores[remaining[k]] - hi) / tau);
    double u = rng.uniform() * total;
    std::size_t chosen = remaining.size() - 1;
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      u -= w[k];
      if (u < 0.0) {
        chosen = k;
        break;
      }
    }
    // Rounding can leave u >= 0 after the loop; fall back to the last item with weight.
    if (chosen == remaining.size() - 1)
      while (chosen > 0 && w[chosen] == 0.0) --chosen;
    picked.push_back(remaining[chosen]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen));
  }
  return picked;
}

std::vector<std::size_t> select_mir_t(std::span<const std::size_t> pool, std::span<const double> pool_scores,
                                      std::size_t batch) {
  if (pool.size() != pool_scores.size()) throw std::invalid_argument("pool and score sizes differ");
  if (batch > pool.size()) throw std::invalid_argument("MIR-T batch larger than the candidate pool");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pool_scores[a] != pool_scores[b]) return pool_scores[a] > pool_scores[b];
    return pool[a] < pool[b];
  });
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < batch; ++k) out.push_back(pool[order[k]]);
  return out;
}

std::vector<std::size_t> ppl_window_candidates(std::span<const double> ppl, double lo, double hi) {
  if (!(lo >= 0.0 && hi <= 100.0 && lo < hi)) throw std::invalid_argument("perplexity window needs 0 <= lo < hi <= 100");
  if (ppl.empty()) return {};
  std::vector<double> sorted(ppl.begin(), ppl.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto pct = [&](double p) {
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
    return sorted[std::max<std::size_t>(rank, 1) - 1];
  };
  const double upper = pct(hi);
  const bool open_below = lo == 0.0;
  const double lower = open_below ? 0.0 : pct(lo);
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < ppl.size(); ++j)
    if ((open_below || ppl[j] > lower) && ppl[j] <= upper) out.push_back(j);
  return out;
}

std::vector<std::size_t> select_ppl_window(std::span<const double> ppl, double lo, double hi, std::size_t batch,
                                           Rng& rng) {
  const auto candidates = ppl_window_candidates(ppl, lo, hi);
  if (candidates.size() < batch)
    throw std::invalid_argument("perplexity window holds " + std::to_string(candidates.size()) +
                                " examples, fewer than the batch of " + std::to_string(batch));
  std::vector<std::size_t> out;
  for (auto k : rng.sample_without_replacement(candidates.size(), batch)) out.push_back(candidates[k]);
  return out;
}

std::vector<std::size_t> select_grad_prod(std::span<const double> products, double tau, std::size_t batch, Rng& rng) {
  return sample_weighted(products, tau, batch, rng);
}

std::vector<std::size_t> replay_steps(std::size_t total_steps, std::size_t interval) {
  if (interval < 1) throw std::invalid_argument("replay interval must be >= 1");
  std::vector<std::size_t> out;
  for (std::size_t s = interval; s <= total_steps; s += interval) out.push_back(s);
  return out;
}

std::size_t ReplayTrace::replayed_count() const {
  std::size_t n = 0;
  for (const auto& e : events) n += e.indices.size();
  return n;
}

bool ReplayTrace::replays_any(std::span<const std::size_t> indices) const {
  std::unordered_set<std::size_t> set(indices.begin(), indices.end());
  for (const auto& e : events)
    for (auto i : e.indices)
      if (set.count(i)) return true;
  return false;
}

std::string cost_formula(Strategy s) {
  switch (s) {
    case Strategy::Random: return "FT(Y)";
    case Strategy::GroundTruth: return "2FT(Y) + EV(N)";
    case Strategy::PredictedOffline: return "2FT(Y) + EV(S) + MC";
    case Strategy::PredictedOnline: return "FT(Y) + EV(S) + MC";
    case Strategy::MirT: return "2FT(Y) + Y*EV(S)";
    case Strategy::PplWindow:
    case Strategy::GradProd: return "FT(Y)";
  }
  return "";
}

namespace {

using Chooser = std::function<std::pair<std::string, std::vector<std::size_t>>(std::size_t)>;

// One pass over the task; `after_step` runs once step s (and its replay) is done.
void run_pass(FineTuneSession& session, const ReplayPolicy& policy, const Chooser* choose, ReplayTrace* trace,
              const std::function<void(std::size_t)>& after_step = {}) {
  session.reset();
  const std::size_t total = session.total_steps();
  for (std::size_t s = 1; s <= total; ++s) {
    const bool event = choose && s % policy.interval == 0;
    if (!event || policy.mode == ReplayMode::Insert) session.step(s);
    if (event) {
      auto [state, indices] = (*choose)(s);
      session.replay(indices);
      if (trace) trace->events.push_back({s, std::move(state), std::move(indices)});
    }
    if (after_step) after_step(s);
  }
}

std::vector<double> gather(const Eigen::VectorXd& v, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[static_cast<Eigen::Index>(i)]);
  return out;
}

std::vector<std::size_t> pick(std::span<const std::size_t> candidates, const std::vector<std::size_t>& positions) {
  std::vector<std::size_t> out;
  out.reserve(positions.size());
  for (auto p : positions) out.push_back(candidates[p]);
  return out;
}

}  // namespace

ReplayTrace orchestrate(const ReplayPolicy& policy, FineTuneSession& session, const RowPredictor& predictor,
                        std::size_t seed_size) {
  policy.validate();
  const bool predicted = policy.strategy == Strategy::PredictedOffline || policy.strategy == Strategy::PredictedOnline;
  if (predicted && !predictor) throw std::invalid_argument("predicted replay needs a row predictor");

  const std::size_t n = session.upstream_size();
  const auto& held_out = session.held_out();
  std::vector<char> is_held(n, 0);
  for (auto i : held_out) {
    if (i >= n) throw std::invalid_argument("held-out index out of range");
    is_held[i] = 1;
  }
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < n; ++j)
    if (!is_held[j]) candidates.push_back(j);
  if (candidates.size() < policy.batch_size) throw std::invalid_argument("fewer replay candidates than one batch");

  ReplayTrace trace;
  trace.strategy = policy.strategy;
  trace.mode = policy.mode;
  trace.seed = policy.seed;
  trace.total_steps = session.total_steps();
  trace.held_out = held_out;
  trace.cost = cost_formula(policy.strategy);

  Rng rng(derive_seed(policy.seed, static_cast<std::uint64_t>(policy.strategy)));
  Rng seed_rng(derive_seed(policy.seed, 0x5eed));

  auto uniform = [&](std::size_t) {
    return std::pair{std::string("uniform"), pick(candidates, rng.sample_without_replacement(candidates.size(),
                                                                                            policy.batch_size))};
  };
  auto draw_seed = [&] {
    if (seed_size >= candidates.size()) throw std::invalid_argument("seed size must be smaller than the candidate set");
    trace.seed_indices = pick(candidates, seed_rng.sample_without_replacement(candidates.size(), seed_size));
  };
  auto predict_scores = [&](const Eigen::VectorXd& measured) {
    SeedSet seed;
    seed.indices.assign(trace.seed_indices.begin(), trace.seed_indices.end());
    seed.values = measured;
    const Eigen::VectorXd row = predictor(seed);
    if (row.size() != static_cast<Eigen::Index>(n)) throw std::runtime_error("predictor returned a row of wrong length");
    if (!row.allFinite()) throw std::runtime_error("predictor returned non-finite forgetting");
    return gather(row, candidates);
  };
  auto weighted_by = [&](std::shared_ptr<const std::vector<double>> scores) {
    return Chooser([&, scores](std::size_t) {
      return std::pair{std::string("weighted"),
                       pick(candidates, sample_weighted(*scores, policy.temperature, policy.batch_size, rng))};
    });
  };

  switch (policy.strategy) {
    case Strategy::Random: {
      const Chooser c = uniform;
      run_pass(session, policy, &c, &trace);
      trace.cost_resolved = "FT(" + std::to_string(trace.total_steps) + ")";
      break;
    }
    case Strategy::GroundTruth: {
      run_pass(session, policy, nullptr, nullptr);
      const Eigen::VectorXd measured = session.forgetting(candidates);
      auto truth = std::make_shared<const std::vector<double>>(measured.data(), measured.data() + measured.size());
      const Chooser c = weighted_by(truth);
      run_pass(session, policy, &c, &trace);
      trace.passes = 2;
      trace.cost_resolved = "2FT(" + std::to_string(trace.total_steps) + ") + EV(" + std::to_string(n) + ")";
      break;
    }
    case Strategy::PredictedOffline: {
      draw_seed();
      run_pass(session, policy, nullptr, nullptr);
      auto scores = std::make_shared<const std::vector<double>>(predict_scores(session.forgetting(trace.seed_indices)));
      const Chooser c = weighted_by(scores);
      run_pass(session, policy, &c, &trace);
      trace.passes = 2;
      trace.cost_resolved = "2FT(" + std::to_string(trace.total_steps) + ") + EV(" + std::to_string(seed_size) + ") + MC";
      break;
    }
    case Strategy::PredictedOnline: {
      draw_seed();
      const auto warmup = static_cast<std::size_t>(std::floor(policy.online_warmup_fraction *
                                                              static_cast<double>(session.total_steps())));
      std::shared_ptr<const std::vector<double>> scores;
      const Chooser c = [&](std::size_t s) {
        if (s <= warmup || !scores) {
          auto [state, idx] = uniform(s);
          return std::pair{std::string("warmup"), std::move(idx)};
        }
        return std::pair{std::string("weighted"),
                         pick(candidates, sample_weighted(*scores, policy.temperature, policy.batch_size, rng))};
      };
      run_pass(session, policy, &c, &trace, [&](std::size_t s) {
        if (s == std::max<std::size_t>(warmup, 1))
          scores = std::make_shared<const std::vector<double>>(predict_scores(session.forgetting(trace.seed_indices)));
      });
      trace.cost_resolved = "FT(" + std::to_string(trace.total_steps) + ") + EV(" + std::to_string(seed_size) + ") + MC";
      break;
    }
    case Strategy::MirT: {
      run_pass(session, policy, nullptr, nullptr);
      const auto probe = session.freeze();
      const Chooser c = [&](std::size_t) {
        const auto pool = pick(candidates, rng.sample_without_replacement(candidates.size(), policy.mir_candidate_size));
        const Eigen::VectorXd measured = probe->measure(pool);
        const std::vector<double> s(measured.data(), measured.data() + measured.size());
        return std::pair{std::string("top-of-pool"), select_mir_t(pool, s, policy.batch_size)};
      };
      run_pass(session, policy, &c, &trace);
      trace.passes = 2;
      trace.cost_resolved = "2FT(" + std::to_string(trace.total_steps) + ") + " + std::to_string(trace.events.size()) +
                            "*EV(" + std::to_string(policy.mir_candidate_size) + ")";
      break;
    }
    case Strategy::PplWindow: {
      const auto ppl = gather(session.base_losses(), candidates);
      const auto window = ppl_window_candidates(ppl, policy.ppl_lo, policy.ppl_hi);
      if (window.size() < policy.batch_size) throw std::invalid_argument("perplexity window smaller than one batch");
      const Chooser c = [&](std::size_t) {
        return std::pair{std::string("window"),
                         pick(candidates, pick(window, rng.sample_without_replacement(window.size(), policy.batch_size)))};
      };
      run_pass(session, policy, &c, &trace);
      trace.cost_resolved = "FT(" + std::to_string(trace.total_steps) + ")";
      break;
    }
    case Strategy::GradProd: {
      auto products = std::make_shared<const std::vector<double>>(gather(session.gradient_products(), candidates));
      const Chooser c = weighted_by(products);
      run_pass(session, policy, &c, &trace);
      trace.cost_resolved = "FT(" + std::to_string(trace.total_steps) + ")";
      break;
    }
  }

  trace.held_out_forgetting = session.forgetting(held_out);
  trace.mean_held_out_forgetting = held_out.empty() ? 0.0 : trace.held_out_forgetting.mean();
  return trace;
}

std::string render_trace_csv(const ReplayTrace& t) {
  std::string out = "step,strategy,state,replayed\n";
  for (const auto& e : t.events) {
    out += std::to_string(e.step) + "," + to_string(t.strategy) + "," + e.state + ",";
    for (std::size_t k = 0; k < e.indices.size(); ++k) {
      if (k) out += ' ';
      out += std::to_string(e.indices[k]);
    }
    out += '\n';
  }
  return out;
}

std::string render_trace_json(const ReplayTrace& t, const ReplayPolicy& policy) {
  nlohmann::json j;
  j["strategy"] = to_string(t.strategy);
  j["mode"] = to_string(t.mode);
  j["seed"] = t.seed;
  j["temperature"] = policy.temperature;
  j["batch_size"] = policy.batch_size;
  j["interval"] = policy.interval;
  j["total_steps"] = t.total_steps;
  j["passes"] = t.passes;
  j["events"] = t.events.size();
  j["replayed"] = t.replayed_count();
  j["seed_indices"] = t.seed_indices;
  j["held_out_size"] = t.held_out.size();
  j["mean_held_out_forgetting"] = t.mean_held_out_forgetting;
  j["cost"] = t.cost;
  j["cost_resolved"] = t.cost_resolved;
  return j.dump(2);
}

}  // namespace amnesia
