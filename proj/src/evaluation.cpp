#include "amnesia/evaluation.hpp"

#include "amnesia/matrix_io.hpp"
#include "amnesia/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <numeric>
#include <unordered_set>

namespace amnesia {

const char* to_string(Regime regime) { return regime == Regime::OutOfDomain ? "out-of-domain" : "in-domain"; }

Regime parse_regime(const std::string& text) {
  if (text == "in-domain" || text == "in") return Regime::InDomain;
  if (text == "out-of-domain" || text == "ood") return Regime::OutOfDomain;
  throw std::invalid_argument("unknown regime '" + text + "'");
}

const char* to_string(Method method) {
  switch (method) {
    case Method::Additive: return "additive";
    case Method::Knn: return "knn";
    case Method::Mf: return "mf";
    case Method::Features: return "features";
    case Method::ResidualAdditive: return "residual-additive";
    case Method::ResidualMf: return "residual-mf";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  for (auto m : {Method::Additive, Method::Knn, Method::Mf, Method::Features, Method::ResidualAdditive,
                 Method::ResidualMf})
    if (text == to_string(m)) return m;
  throw std::invalid_argument("unknown method '" + text + "'");
}

void SplitSpec::validate() const {
  if (train_tasks.empty() || test_tasks.empty()) throw std::invalid_argument("split needs train and test tasks");
  if (repeats < 1) throw std::invalid_argument("split repeats must be >= 1");
  if (seed_size < 1) throw std::invalid_argument("seed size must be >= 1");
  std::unordered_set<std::string> train(train_tasks.begin(), train_tasks.end());
  for (const auto& t : test_tasks)
    if (train.count(t)) throw std::invalid_argument("task '" + t + "' is in both train and test splits");
}

namespace {

template <class Fn>
void for_scored(const Eigen::VectorXd& truth, const SeedSet& seed, const Mask* observed_row, Fn&& fn) {
  std::vector<char> is_seed(static_cast<std::size_t>(truth.size()), 0);
  for (auto idx : seed.indices) is_seed[static_cast<std::size_t>(idx)] = 1;
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    if (is_seed[static_cast<std::size_t>(j)]) continue;
    if (observed_row && !(*observed_row)(0, j)) continue;
    fn(j);
  }
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double score_rmse(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted, const SeedSet& seed,
                  const Mask* observed_row) {
  double ss = 0.0;
  std::size_t n = 0;
  for_scored(truth, seed, observed_row, [&](Eigen::Index j) {
    const double e = truth[j] - predicted[j];
    ss += e * e;
    ++n;
  });
  if (n == 0) throw std::invalid_argument("no columns left to score");
  return std::sqrt(ss / static_cast<double>(n));
}

double score_f1(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted, const SeedSet& seed,
                const Mask* observed_row) {
  std::vector<double> t, p;
  for_scored(truth, seed, observed_row, [&](Eigen::Index j) {
    t.push_back(truth[j]);
    p.push_back(predicted[j]);
  });
  if (t.empty()) throw std::invalid_argument("no columns left to score");
  return f1_score(t, p);
}

EvalReport evaluate_protocol(const AssociationMatrix& m, const SplitSpec& split, Method method,
                             const EvalParams& params) {
  split.validate();
  if (split.seed_size >= static_cast<std::size_t>(m.cols()))
    throw std::invalid_argument("seed size must be smaller than the number of examples");

  std::vector<Eigen::Index> train_rows, test_rows;
  for (const auto& id : split.train_tasks) {
    const auto idx = m.task_index(id);
    if (!idx) throw std::invalid_argument("train task '" + id + "' not in matrix");
    train_rows.push_back(*idx);
  }
  for (const auto& id : split.test_tasks) {
    const auto idx = m.task_index(id);
    if (!idx) throw std::invalid_argument("test task '" + id + "' not in matrix");
    test_rows.push_back(*idx);
  }
  const AssociationMatrix train = m.select_rows(train_rows);

  const bool needs_features =
      method == Method::Features || method == Method::ResidualAdditive || method == Method::ResidualMf;
  if (needs_features && (!params.task_features || !params.example_features))
    throw std::invalid_argument(std::string("method ") + to_string(method) + " needs task and example feature tables");

  // Everything that does not depend on the seed is fitted once.
  std::optional<AdditiveCompleter> additive;
  std::optional<KnnCompleter> knn;
  std::optional<MfCompleter> mf;
  std::optional<FeatureRegressor> regressor;
  switch (method) {
    case Method::Additive:
    case Method::ResidualAdditive: additive.emplace(train); break;
    case Method::Knn: knn.emplace(train, params.knn); break;
    case Method::Mf:
    case Method::ResidualMf: mf.emplace(train, params.mf); break;
    case Method::Features: break;
  }
  if (needs_features) {
    Eigen::MatrixXd target = train.values();
    if (additive) target -= additive->train_fit();
    if (mf) target -= mf->train_fit();
    regressor.emplace(params.features);
    regressor->fit(params.task_features->gather(train.task_ids()), params.example_features->gather(train.example_ids()),
                   target, train.observed());
  }

  const bool binary = m.kind() == ValueKind::Binary;
  const std::size_t jobs_total = test_rows.size() * split.repeats;
  std::vector<double> scores(jobs_total, 0.0);
  std::vector<std::vector<std::string>> notes(jobs_total);

  parallel_for(jobs_total, params.jobs, [&](std::size_t job) {
    const std::size_t t = job / split.repeats;
    const std::size_t r = job % split.repeats;
    const Eigen::Index row = test_rows[t];
    const Eigen::VectorXd truth = m.values().row(row).transpose();
    const Mask observed_row = m.observed().row(row);

    // Seeds come from observed columns only.
    std::vector<Eigen::Index> observed_cols;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (observed_row(0, j)) observed_cols.push_back(j);
    if (split.seed_size >= observed_cols.size())
      throw std::invalid_argument("seed size exceeds the observed entries of task " + m.task_ids()[row]);
    Rng rng(derive_seed(params.master_seed, static_cast<std::uint64_t>(row), r));
    const auto picks = rng.sample_without_replacement(observed_cols.size(), split.seed_size);
    SeedSet seed;
    seed.values.resize(static_cast<Eigen::Index>(picks.size()));
    for (std::size_t k = 0; k < picks.size(); ++k) {
      seed.indices.push_back(observed_cols[picks[k]]);
      seed.values[static_cast<Eigen::Index>(k)] = truth[observed_cols[picks[k]]];
    }

    RowPrediction pred;
    switch (method) {
      case Method::Additive: pred = additive->predict(seed); break;
      case Method::Knn: pred = knn->predict(seed); break;
      case Method::Mf: pred = mf->predict(seed); break;
      case Method::Features:
        pred.values = regressor->predict_row(params.task_features->row(m.task_ids()[row]));
        break;
      case Method::ResidualAdditive:
      case Method::ResidualMf: {
        pred = additive ? additive->predict(seed) : mf->predict(seed);
        pred.values += regressor->predict_row(params.task_features->row(m.task_ids()[row]));
        overwrite_seed(pred.values, seed);
        break;
      }
    }
    scores[job] = 100.0 * (binary ? score_f1(truth, pred.values, seed, &observed_row)
                                                 : score_rmse(truth, pred.values, seed, &observed_row));
    notes[job] = std::move(pred.notes);
  });

  EvalReport report;
  report.method = method;
  report.metric = binary ? "f1" : "rmse";
  report.regime = split.regime;
  report.seed_size = split.seed_size;
  report.repeats = split.repeats;
  report.master_seed = params.master_seed;
  std::vector<double> task_means;
  for (std::size_t t = 0; t < test_rows.size(); ++t) {
    TaskScore ts;
    ts.task_id = m.task_ids()[test_rows[t]];
    ts.per_repeat.assign(scores.begin() + static_cast<std::ptrdiff_t>(t * split.repeats),
                         scores.begin() + static_cast<std::ptrdiff_t>((t + 1) * split.repeats));
    ts.mean = mean_of(ts.per_repeat);
    ts.sd = sd_of(ts.per_repeat);
    task_means.push_back(ts.mean);
    report.tasks.push_back(std::move(ts));
  }
  report.mean = mean_of(task_means);
  report.sd = sd_of(task_means);
  std::unordered_set<std::string> seen;
  for (const auto& list : notes)
    for (const auto& n : list)
      if (seen.insert(n).second) report.notes.push_back(n);
  return report;
}

std::string render_eval_csv(const EvalReport& r) {
  std::string out = "task_id,mean,sd";
  for (std::size_t k = 0; k < r.repeats; ++k) out += ",repeat_" + std::to_string(k + 1);
  out += '\n';
  for (const auto& t : r.tasks) {
    out += t.task_id + "," + format_double(t.mean) + "," + format_double(t.sd);
    for (double v : t.per_repeat) out += "," + format_double(v);
    out += '\n';
  }
  out += "__summary__," + format_double(r.mean) + "," + format_double(r.sd);
  for (std::size_t k = 0; k < r.repeats; ++k) out += ",";
  out += '\n';
  return out;
}

std::string render_eval_json(const EvalReport& r, const EvalParams& params) {
  nlohmann::json j;
  j["method"] = to_string(r.method);
  j["metric"] = r.metric;
  j["score_scale"] = r.scale;
  j["scale_note"] = r.metric + " values are multiplied by " + format_double(r.scale);
  j["regime"] = to_string(r.regime);
  j["seed_size"] = r.seed_size;
  j["repeats"] = r.repeats;
  j["master_seed"] = r.master_seed;
  j["mean"] = r.mean;
  j["sd"] = r.sd;
  j["params"] = {{"knn_k", params.knn.k},
                 {"knn_similarity", params.knn.similarity == stats::Correlation::Pearson ? "pearson" : "spearman"},
                 {"mf_rank", params.mf.rank},
                 {"mf_lambda", params.mf.lambda},
                 {"feature_hidden", params.features.hidden},
                 {"feature_output", params.features.output},
                 {"feature_epochs", params.features.epochs},
                 {"feature_seed", params.features.seed}};
  j["notes"] = r.notes;
  return j.dump(2);
}

}  // namespace amnesia
