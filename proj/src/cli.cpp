#include "amnesia/cli.hpp"

#include "amnesia/evaluation.hpp"
#include "amnesia/factor_model_io.hpp"
#include "amnesia/feature_model.hpp"
#include "amnesia/lowrank.hpp"
#include "amnesia/matrix_io.hpp"
#include "amnesia/oracle.hpp"
#include "amnesia/replay_study.hpp"
#include "amnesia/stats.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

namespace amnesia::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t\r");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// "@path" reads one id per line; anything else is a comma-separated list.
std::vector<std::string> id_list(const std::string& text) {
  if (!text.empty() && text.front() == '@') {
    std::vector<std::string> out;
    std::istringstream in(read_file(text.substr(1)));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) out.push_back(line);
    }
    return out;
  }
  return split_list(text);
}

// One number per line, or the last column of a CSV; a non-numeric first line is a header.
std::vector<double> read_vector(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<double> out;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    const std::string cell = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      out.push_back(parse_double(cell));
    } catch (const DataError&) {
      if (!first) throw;
    }
    first = false;
  }
  return out;
}

SeedSet read_seed_file(const fs::path& path, const AssociationMatrix& train) {
  std::map<std::string, Eigen::Index> column;
  for (std::size_t j = 0; j < train.example_ids().size(); ++j) column[train.example_ids()[j]] = static_cast<Eigen::Index>(j);
  std::istringstream in(read_file(path));
  std::string line;
  SeedSet seed;
  std::vector<double> values;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("seed file rows must be example_id,value");
    const std::string id = line.substr(0, comma);
    if (first && id == "example_id") {
      first = false;
      continue;
    }
    first = false;
    const auto it = column.find(id);
    if (it == column.end()) throw DataError("seed example '" + id + "' is not a column of the matrix");
    seed.indices.push_back(it->second);
    values.push_back(parse_double(line.substr(comma + 1)));
  }
  seed.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  seed.validate(train.cols());
  return seed;
}

std::string render_vector_csv(const std::vector<std::string>& ids, const Eigen::VectorXd& v, const char* header) {
  std::string out = std::string("example_id,") + header + "\n";
  for (std::size_t j = 0; j < ids.size(); ++j) out += ids[j] + "," + format_double(v[static_cast<Eigen::Index>(j)]) + "\n";
  return out;
}

ValueKind kind_of(const std::string& text) { return parse_value_kind(text); }

AssociationMatrix load_input(const std::string& path, const std::string& format, const std::string& kind) {
  const MatrixFormat f = format == "auto" ? format_from_path(path) : parse_matrix_format(format);
  return load_matrix(path, f, kind_of(kind));
}

void prepare_out(const fs::path& dir) {
  if (dir.empty()) throw UsageError("--out is required");
  fs::create_directories(dir);
}

struct OracleArgs {
  OracleConfig cfg;
  std::string source = "blobs";
  std::string interp = "bilinear";
};

void add_oracle_options(CLI::App* sub, OracleArgs& a) {
  auto& c = a.cfg;
  sub->add_option("--depth", c.depth, "weight layers, 1-5")->capture_default_str();
  sub->add_option("--width", c.width, "hidden width")->capture_default_str();
  sub->add_option("--task-size", c.task_size, "examples per rotation task")->capture_default_str();
  sub->add_option("--pretrain-lr", c.pretrain_lr)->capture_default_str();
  sub->add_option("--pretrain-epochs", c.pretrain_epochs)->capture_default_str();
  sub->add_option("--pretrain-batch", c.pretrain_batch)->capture_default_str();
  sub->add_option("--finetune-lr", c.finetune_lr)->capture_default_str();
  sub->add_option("--finetune-epochs", c.finetune_epochs)->capture_default_str();
  sub->add_option("--finetune-batch", c.finetune_batch)->capture_default_str();
  sub->add_option("--source", a.source, "blobs or idx")->capture_default_str();
  sub->add_option("--idx-images", c.idx_images, "IDX image file (source idx)");
  sub->add_option("--idx-labels", c.idx_labels, "IDX label file (source idx)");
  sub->add_option("--interp", a.interp, "bilinear or nearest")->capture_default_str();
  sub->add_option("--pretrain-angles", c.pretrain_angles)->delimiter(',')->capture_default_str();
  sub->add_option("--overlap-angles", c.overlap_angles)->delimiter(',')->capture_default_str();
  sub->add_option("--disjoint-angles", c.disjoint_angles)->delimiter(',')->capture_default_str();
  sub->add_option("--blob-noise", c.blobs.noise)->capture_default_str();
  sub->add_option("--blob-jitter", c.blobs.position_jitter)->capture_default_str();
  sub->add_option("--blob-ring", c.blobs.ring_amplitude)->capture_default_str();
  sub->add_option("--blob-ring-groups", c.blobs.ring_groups)->capture_default_str();
}

OracleConfig resolve_oracle(const OracleArgs& a, std::uint64_t seed, std::size_t jobs) {
  OracleConfig c = a.cfg;
  c.source = parse_data_source(a.source);
  if (a.interp == "bilinear") c.interpolation = Interpolation::Bilinear;
  else if (a.interp == "nearest") c.interpolation = Interpolation::Nearest;
  else throw UsageError("unknown interpolation '" + a.interp + "'");
  c.master_seed = seed;
  c.jobs = jobs;
  c.validate();
  return c;
}

struct Common {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "master seed (falls back to AMNESIA_SEED)")
      ->envname("AMNESIA_SEED")
      ->capture_default_str();
  sub->add_option("--jobs", c.jobs, "worker threads")->capture_default_str();
  sub->add_option("--out", c.out, "output directory")->required();
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  Common common;
  std::string matrix, format = "auto", kind = "continuous", method = "auto", link = "identity";
  std::vector<int> ranks{1, 2, 3, 5};
  std::vector<int> components;
  FitConfig fit;
  bool heatmap = false;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const AssociationMatrix m = load_input(a.matrix, a.format, a.kind);
  prepare_out(a.common.out);
  FitConfig cfg = a.fit;
  cfg.seed = a.common.seed;
  cfg.link = parse_link(a.link);
  if (a.ranks.empty()) throw UsageError("--ranks must not be empty");
  for (int r : a.ranks)
    if (r < 1) throw UsageError("ranks must be >= 1");

  std::vector<std::pair<int, FitReport>> sweep;
  std::optional<FactorModel> top;
  const int top_rank = *std::max_element(a.ranks.begin(), a.ranks.end());
  if (a.method == "auto") {
    sweep = rank_sweep(m, a.ranks, cfg);
  } else if (a.method == "svd" || a.method == "gd") {
    for (int r : a.ranks) {
      if (a.method == "svd") {
        FactorModel f = fit_svd(m, r);
        sweep.emplace_back(r, goodness_of_fit(m, f));
        if (r == top_rank) top = std::move(f);
      } else {
        GdFit g = fit_gd(m, r, cfg);
        sweep.emplace_back(r, g.report);
        if (r == top_rank) top = std::move(g.model);
      }
    }
  } else {
    throw UsageError("unknown fit method '" + a.method + "' (auto, svd, gd)");
  }
  if (!top) {
    const bool svd_path = m.kind() == ValueKind::Continuous && m.fully_observed() && cfg.link == Link::Identity;
    if (svd_path) {
      top = fit_svd(m, top_rank);
    } else {
      if (m.kind() == ValueKind::Binary) cfg.link = Link::Logistic;
      top = fit_gd(m, top_rank, cfg).model;
    }
  }

  std::string csv = "rank,r2,f1,frobenius_error,epochs_run\n";
  for (const auto& [r, rep] : sweep)
    csv += std::to_string(r) + "," + format_double(rep.r2) + "," + (rep.f1 ? format_double(*rep.f1) : "") + "," +
           format_double(rep.frobenius_error) + "," + std::to_string(rep.epochs_run) + "\n";
  write_file(fs::path(a.common.out) / "sweep.csv", csv);
  out << csv;

  const std::string stem = "model_r" + std::to_string(top_rank);
  save_factor_model(*top, fs::path(a.common.out) / (stem + ".fmx"));
  write_file(fs::path(a.common.out) / (stem + ".json"), factor_model_to_json(*top));

  for (int k : a.components) {
    if (k < 1 || k > top->rank()) throw UsageError("component " + std::to_string(k) + " outside 1.." + std::to_string(top->rank()));
    std::string c = "kind,id,value\n";
    for (Eigen::Index i = 0; i < top->task_factors.rows(); ++i)
      c += "task," + m.task_ids()[static_cast<std::size_t>(i)] + "," + format_double(top->task_factors(i, k - 1)) + "\n";
    for (Eigen::Index j = 0; j < top->example_factors.rows(); ++j)
      c += "example," + m.example_ids()[static_cast<std::size_t>(j)] + "," + format_double(top->example_factors(j, k - 1)) +
           "\n";
    write_file(fs::path(a.common.out) / ("component_" + std::to_string(k) + ".csv"), c);
  }

  if (a.heatmap) {
    double lo = 0.0, hi = 1.0;
    if (m.kind() == ValueKind::Continuous) {
      lo = std::numeric_limits<double>::infinity();
      hi = -lo;
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
          if (m.is_observed(i, j)) {
            lo = std::min(lo, m(i, j));
            hi = std::max(hi, m(i, j));
          }
      if (!(lo < hi)) hi = lo + 1.0;
    }
    export_heatmap(m, fs::path(a.common.out) / "z.pgm", lo, hi);
    const AssociationMatrix fitted(top->predict(), ValueKind::Continuous, m.task_ids(), m.example_ids());
    export_heatmap(fitted, fs::path(a.common.out) / (stem + ".pgm"), lo, hi);
  }
  return kExitOk;
}

// ---- predict / eval ----------------------------------------------------------

struct CompletionArgs {
  std::string method = "mf";
  int k = 5;
  std::string similarity = "pearson";
  int rank = 5;
  double lambda = 1e-3;
  std::string task_features, example_features;
  FeatureModelConfig features;
};

void add_completion_options(CLI::App* sub, CompletionArgs& c) {
  sub->add_option("--k", c.k, "KNN neighbours")->capture_default_str();
  sub->add_option("--similarity", c.similarity, "pearson or spearman")->capture_default_str();
  sub->add_option("--rank", c.rank, "MF rank")->capture_default_str();
  sub->add_option("--lambda", c.lambda, "MF fold-in ridge")->capture_default_str();
  sub->add_option("--task-features", c.task_features, "task embedding CSV");
  sub->add_option("--example-features", c.example_features, "example embedding CSV");
  sub->add_option("--feature-hidden", c.features.hidden)->capture_default_str();
  sub->add_option("--feature-output", c.features.output)->capture_default_str();
  sub->add_option("--feature-epochs", c.features.epochs)->capture_default_str();
  sub->add_option("--feature-lr", c.features.learning_rate)->capture_default_str();
}

struct PredictArgs {
  Common common;
  CompletionArgs completion;
  std::string matrix, format = "auto", kind = "continuous", seed_file, task_id;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const AssociationMatrix train = load_input(a.matrix, a.format, a.kind);
  const SeedSet seed = read_seed_file(a.seed_file, train);
  prepare_out(a.common.out);
  const auto& c = a.completion;
  const Method method = parse_method(c.method);
  FeatureModelConfig fcfg = c.features;
  fcfg.seed = a.common.seed;
  RowPrediction pred;
  std::optional<FeatureTable> tf, ef;
  if (method == Method::Features || method == Method::ResidualAdditive || method == Method::ResidualMf) {
    if (c.task_features.empty() || c.example_features.empty() || a.task_id.empty())
      throw UsageError("feature methods need --task-features, --example-features and --task-id");
    tf.emplace(load_feature_table(c.task_features));
    ef.emplace(load_feature_table(c.example_features));
  }
  MfOptions mf;
  mf.rank = c.rank;
  mf.lambda = c.lambda;
  mf.fit.seed = a.common.seed;
  switch (method) {
    case Method::Additive: pred = predict_additive(train, seed); break;
    case Method::Knn: pred = KnnCompleter(train, {c.k, stats::parse_correlation(c.similarity)}).predict(seed); break;
    case Method::Mf: pred = MfCompleter(train, mf).predict(seed); break;
    case Method::Features: pred = predict_features(train, *tf, *ef, a.task_id, fcfg); break;
    case Method::ResidualAdditive:
      pred = predict_residual(train, seed, *tf, *ef, a.task_id, ResidualBase::Additive, fcfg, mf);
      break;
    case Method::ResidualMf: pred = predict_residual(train, seed, *tf, *ef, a.task_id, ResidualBase::MF, fcfg, mf); break;
  }
  write_file(fs::path(a.common.out) / "prediction.csv", render_vector_csv(train.example_ids(), pred.values, "predicted"));
  std::string notes;
  for (const auto& n : pred.notes) notes += n + "\n";
  write_file(fs::path(a.common.out) / "notes.txt", notes);
  for (const auto& n : pred.notes) out << "note: " << n << "\n";
  out << "wrote " << pred.values.size() << " predictions\n";
  return kExitOk;
}

struct EvalArgs {
  Common common;
  CompletionArgs completion;
  std::string matrix, format = "auto", kind = "continuous", train_tasks, test_tasks, regime = "in-domain";
  std::string methods = "additive,knn,mf";
  std::size_t seed_size = kDefaultSeedSize;
  std::size_t repeats = 10;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const AssociationMatrix m = load_input(a.matrix, a.format, a.kind);
  SplitSpec split;
  split.train_tasks = id_list(a.train_tasks);
  split.test_tasks = id_list(a.test_tasks);
  split.regime = parse_regime(a.regime);
  split.seed_size = a.seed_size;
  split.repeats = a.repeats;
  split.validate();
  prepare_out(a.common.out);

  const auto& c = a.completion;
  EvalParams params;
  params.knn = {c.k, stats::parse_correlation(c.similarity)};
  params.mf.rank = c.rank;
  params.mf.lambda = c.lambda;
  params.mf.fit.seed = a.common.seed;
  params.features = c.features;
  params.features.seed = a.common.seed;
  params.master_seed = a.common.seed;
  params.jobs = a.common.jobs;
  std::optional<FeatureTable> tf, ef;
  if (!c.task_features.empty()) params.task_features = &tf.emplace(load_feature_table(c.task_features));
  if (!c.example_features.empty()) params.example_features = &ef.emplace(load_feature_table(c.example_features));

  std::string summary = "method,metric,regime,seed_size,repeats,mean,sd\n";
  for (const auto& name : split_list(a.methods)) {
    const Method method = parse_method(name);
    const EvalReport r = evaluate_protocol(m, split, method, params);
    write_file(fs::path(a.common.out) / ("eval_" + name + ".csv"), render_eval_csv(r));
    write_file(fs::path(a.common.out) / ("eval_" + name + ".json"), render_eval_json(r, params));
    summary += name + "," + r.metric + "," + to_string(r.regime) + "," + std::to_string(r.seed_size) + "," +
               std::to_string(r.repeats) + "," + format_double(r.mean) + "," + format_double(r.sd) + "\n";
  }
  write_file(fs::path(a.common.out) / "summary.csv", summary);
  out << summary;
  return kExitOk;
}

// ---- replay ------------------------------------------------------------------

struct ReplayArgs {
  Common common;
  OracleArgs oracle;
  ReplayStudyConfig study;
  std::string strategies = "random,gt,mf-offline";
  std::string pool = "both";
  std::string mode = "replace";
};

int cmd_replay(const ReplayArgs& a, std::ostream& out) {
  ReplayStudyConfig cfg = a.study;
  cfg.oracle = resolve_oracle(a.oracle, a.common.seed, a.common.jobs);
  cfg.strategies.clear();
  for (const auto& s : split_list(a.strategies)) cfg.strategies.push_back(parse_strategy(s));
  cfg.pool = parse_task_pool(a.pool);
  cfg.policy.mode = parse_replay_mode(a.mode);
  cfg.policy.seed = a.common.seed;
  cfg.mf.fit.seed = a.common.seed;
  cfg.validate();
  prepare_out(a.common.out);

  const ReplayStudy study = run_replay_study(cfg);
  const fs::path dir(a.common.out);
  write_file(dir / "summary.csv", render_study_csv(study));
  write_file(dir / "tasks.csv", render_study_tasks_csv(study));
  fs::create_directories(dir / "traces");
  for (const auto& o : study.outcomes) {
    for (std::size_t t = 0; t < o.traces.size(); ++t) {
      ReplayPolicy p = cfg.policy;
      p.strategy = o.strategy;
      const std::string stem = std::string(to_string(o.strategy)) + "_task" + std::to_string(t + 1);
      write_file(dir / "traces" / (stem + ".csv"), render_trace_csv(o.traces[t]));
      write_file(dir / "traces" / (stem + ".json"), render_trace_json(o.traces[t], p));
    }
  }
  out << render_study_csv(study);
  return kExitOk;
}

// ---- synth -------------------------------------------------------------------

struct SynthArgs {
  Common common;
  OracleArgs oracle;
  std::string regime = "both";
  std::vector<int> ranks{1, 2, 3, 4, 5};
  std::string format = "csv";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  OracleConfig cfg = resolve_oracle(a.oracle, a.common.seed, a.common.jobs);
  const TaskPool pool = parse_task_pool(a.regime);
  const MatrixFormat format = parse_matrix_format(a.format);
  prepare_out(a.common.out);

  const ExperimentResult r = run_experiment(cfg);
  const fs::path dir(a.common.out);
  const std::string ext = format == MatrixFormat::Binary ? ".amx" : ".csv";
  std::string table = "regime,rank,r2\n";
  auto emit = [&](const AssociationMatrix& m, const char* name) {
    save_matrix(m, dir / (std::string("z_") + name + ext), format);
    for (const auto& [rank, rep] : rank_sweep(m, a.ranks)) table += std::string(name) + "," + std::to_string(rank) + "," + format_double(rep.r2) + "\n";
  };
  if (pool != TaskPool::Disjoint) emit(r.overlap, "overlap");
  if (pool != TaskPool::Overlap) emit(r.disjoint, "disjoint");
  write_file(dir / "r2_sweep.csv", table);
  std::ostringstream info;
  info << "{\n  \"pretrain_accuracy\": " << format_double(r.pretrain_accuracy) << ",\n  \"pretrained_fingerprint\": \""
       << std::hex << r.pretrained_fingerprint << std::dec << "\",\n  \"depth\": " << cfg.depth
       << ",\n  \"master_seed\": " << cfg.master_seed << "\n}\n";
  write_file(dir / "summary.json", info.str());
  out << table;
  return kExitOk;
}

// ---- stats -------------------------------------------------------------------

struct StatsArgs {
  Common common;
  std::string x, y, matrix, format = "auto", kind = "continuous", similarity = "pearson";
  std::string ttest_a, ttest_b, project;
  std::size_t dim = 512;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  prepare_out(a.common.out);
  std::string table = "statistic,value\n";
  bool any = false;
  if (!a.x.empty() || !a.y.empty()) {
    if (a.x.empty() || a.y.empty()) throw UsageError("--x and --y go together");
    const auto r = stats::correlate(read_vector(a.x), read_vector(a.y));
    table += "pearson," + format_double(r.pearson) + "\nspearman," + format_double(r.spearman) + "\nn," +
             std::to_string(r.n) + "\n";
    any = true;
  }
  if (!a.matrix.empty()) {
    const AssociationMatrix m = load_input(a.matrix, a.format, a.kind);
    table += "avg_row_correlation_" + a.similarity + "," +
             format_double(stats::avg_row_correlation(m, stats::parse_correlation(a.similarity))) + "\n";
    any = true;
  }
  if (!a.ttest_a.empty() || !a.ttest_b.empty()) {
    if (a.ttest_a.empty() || a.ttest_b.empty()) throw UsageError("--ttest-a and --ttest-b go together");
    const auto t = stats::paired_t_test(read_vector(a.ttest_a), read_vector(a.ttest_b));
    table += "t," + format_double(t.t) + "\np_two_sided," + format_double(t.p_two_sided) + "\ndof," +
             format_double(t.dof) + "\n";
    any = true;
  }
  if (!a.project.empty()) {
    const auto v = read_vector(a.project);
    const stats::ProjectionMatrix p(v.size(), a.dim, a.common.seed);
    const Eigen::VectorXd proj = p.project(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    std::string csv = "index,value\n";
    for (Eigen::Index i = 0; i < proj.size(); ++i) csv += std::to_string(i) + "," + format_double(proj[i]) + "\n";
    write_file(fs::path(a.common.out) / "projection.csv", csv);
    table += "projected_dim," + std::to_string(a.dim) + "\n";
    any = true;
  }
  if (!any) throw UsageError("stats needs --x/--y, --matrix, --ttest-a/--ttest-b or --project");
  write_file(fs::path(a.common.out) / "stats.csv", table);
  out << table;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Measure, model, predict and mitigate example-level forgetting.", "amnesia");
  app.set_config("--config", "", "ini config file with one [subcommand] section; command-line flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();
  app.require_subcommand(1);

  FitArgs fit;
  auto* s_fit = app.add_subcommand("fit", "rank sweeps, factor export and heatmaps");
  add_common(s_fit, fit.common);
  s_fit->add_option("--matrix", fit.matrix, "association matrix (CSV or .amx)")->required();
  s_fit->add_option("--format", fit.format, "auto, csv or binary")->capture_default_str();
  s_fit->add_option("--kind", fit.kind, "continuous or binary (CSV input)")->capture_default_str();
  s_fit->add_option("--ranks", fit.ranks)->delimiter(',')->capture_default_str();
  s_fit->add_option("--method", fit.method, "auto, svd or gd")->capture_default_str();
  s_fit->add_option("--link", fit.link, "identity or logistic (gd)")->capture_default_str();
  s_fit->add_option("--epochs", fit.fit.epochs)->capture_default_str();
  s_fit->add_option("--lr", fit.fit.learning_rate)->capture_default_str();
  s_fit->add_option("--l2", fit.fit.l2)->capture_default_str();
  s_fit->add_option("--init-scale", fit.fit.init_scale)->capture_default_str();
  s_fit->add_flag("--bias", fit.fit.use_bias, "fit task and example biases (gd)");
  s_fit->add_option("--components", fit.components, "1-based components to export")->delimiter(',');
  s_fit->add_flag("--heatmap", fit.heatmap, "write PGM heatmaps of Z and the top-rank fit");

  PredictArgs predict;
  auto* s_predict = app.add_subcommand("predict", "complete one task's row from seed forgetting");
  add_common(s_predict, predict.common);
  add_completion_options(s_predict, predict.completion);
  s_predict->add_option("--matrix", predict.matrix, "training association matrix")->required();
  s_predict->add_option("--format", predict.format)->capture_default_str();
  s_predict->add_option("--kind", predict.kind)->capture_default_str();
  s_predict->add_option("--seed-file", predict.seed_file, "CSV example_id,value")->required();
  s_predict->add_option("--method", predict.completion.method,
                        "additive, knn, mf, features, residual-additive, residual-mf")
      ->capture_default_str();
  s_predict->add_option("--task-id", predict.task_id, "id of the new task in the task feature table");

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("eval", "seeded completion protocol over a train/test task split");
  add_common(s_eval, eval.common);
  add_completion_options(s_eval, eval.completion);
  s_eval->add_option("--matrix", eval.matrix)->required();
  s_eval->add_option("--format", eval.format)->capture_default_str();
  s_eval->add_option("--kind", eval.kind)->capture_default_str();
  s_eval->add_option("--train-tasks", eval.train_tasks, "comma list or @file")->required();
  s_eval->add_option("--test-tasks", eval.test_tasks, "comma list or @file")->required();
  s_eval->add_option("--regime", eval.regime, "in-domain or out-of-domain")->capture_default_str();
  s_eval->add_option("--seed-size", eval.seed_size)->capture_default_str();
  s_eval->add_option("--repeats", eval.repeats)->capture_default_str();
  s_eval->add_option("--methods", eval.methods)->capture_default_str();

  ReplayArgs replay;
  auto* s_replay = app.add_subcommand("replay", "replay strategies on the rotated-task oracle");
  add_common(s_replay, replay.common);
  add_oracle_options(s_replay, replay.oracle);
  s_replay->add_option("--strategies", replay.strategies,
                       "random, gt, mf-offline, mf-online, mir-t, ppl-window, grad-prod")
      ->capture_default_str();
  s_replay->add_option("--tasks", replay.study.tasks, "evaluation tasks")->capture_default_str();
  s_replay->add_option("--pool", replay.pool, "overlap, disjoint or both")->capture_default_str();
  s_replay->add_option("--held-out", replay.study.held_out)->capture_default_str();
  s_replay->add_option("--seed-size", replay.study.seed_size)->capture_default_str();
  s_replay->add_option("--interval", replay.study.policy.interval)->capture_default_str();
  s_replay->add_option("--replay-batch", replay.study.policy.batch_size)->capture_default_str();
  s_replay->add_option("--temperature", replay.study.policy.temperature)->capture_default_str();
  s_replay->add_option("--mode", replay.mode, "replace or insert")->capture_default_str();
  s_replay->add_option("--warmup", replay.study.policy.online_warmup_fraction)->capture_default_str();
  s_replay->add_option("--mir-pool", replay.study.policy.mir_candidate_size)->capture_default_str();
  s_replay->add_option("--ppl-lo", replay.study.policy.ppl_lo)->capture_default_str();
  s_replay->add_option("--ppl-hi", replay.study.policy.ppl_hi)->capture_default_str();
  s_replay->add_option("--mf-rank", replay.study.mf.rank)->capture_default_str();
  s_replay->add_option("--mf-lambda", replay.study.mf.lambda)->capture_default_str();

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "run the rotated-task oracle and sweep ranks");
  add_common(s_synth, synth.common);
  add_oracle_options(s_synth, synth.oracle);
  s_synth->add_option("--regime", synth.regime, "overlap, disjoint or both")->capture_default_str();
  s_synth->add_option("--ranks", synth.ranks)->delimiter(',')->capture_default_str();
  s_synth->add_option("--matrix-format", synth.format, "csv or binary")->capture_default_str();

  StatsArgs st;
  auto* s_stats = app.add_subcommand("stats", "correlations, row-pair averages, t-tests, projections");
  add_common(s_stats, st.common);
  s_stats->add_option("--x", st.x, "vector file");
  s_stats->add_option("--y", st.y, "vector file");
  s_stats->add_option("--matrix", st.matrix);
  s_stats->add_option("--format", st.format)->capture_default_str();
  s_stats->add_option("--kind", st.kind)->capture_default_str();
  s_stats->add_option("--similarity", st.similarity)->capture_default_str();
  s_stats->add_option("--ttest-a", st.ttest_a, "vector file");
  s_stats->add_option("--ttest-b", st.ttest_b, "vector file");
  s_stats->add_option("--project", st.project, "vector file to project");
  s_stats->add_option("--dim", st.dim, "projection dimension")->capture_default_str();

  for (auto* sub : app.get_subcommands({})) sub->configurable();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    int code = kExitOk;
    if (name == "fit") code = cmd_fit(fit, out);
    else if (name == "predict") code = cmd_predict(predict, out);
    else if (name == "eval") code = cmd_eval(eval, out);
    else if (name == "replay") code = cmd_replay(replay, out);
    else if (name == "synth") code = cmd_synth(synth, out);
    else if (name == "stats") code = cmd_stats(st, out);
    // Resolved configuration, including seeds; `--config` on this file reproduces the run.
    const std::string out_dir = chosen->get_option("--out")->as<std::string>();
    write_file(fs::path(out_dir) / "config.ini", "[" + name + "]\n" + chosen->config_to_str(true, false));
    return code;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << name << ": invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << "\n";
    return kExitFailure;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace amnesia::cli
