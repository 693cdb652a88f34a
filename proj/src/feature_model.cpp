#include "amnesia/feature_model.hpp"

#include "amnesia/matrix_io.hpp"
#include "amnesia/random.hpp"

#include <cmath>

namespace amnesia {

FeatureTable::FeatureTable(std::vector<std::string> ids, Eigen::MatrixXd vectors)
    : ids_(std::move(ids)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(ids_.size()) != vectors_.rows()) throw DataError("feature id count mismatch");
  if (!vectors_.allFinite()) throw DataError("feature vectors must be finite");
  check_unique_ids(ids_, "feature");
  for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], static_cast<Eigen::Index>(i));
}

Eigen::VectorXd FeatureTable::row(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw DataError("no feature vector for id '" + id + "'");
  return vectors_.row(it->second).transpose();
}

Eigen::MatrixXd FeatureTable::gather(const std::vector<std::string>& ids) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), dim());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = row(ids[i]).transpose();
  return out;
}

FeatureTable parse_feature_table(std::string_view text) {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::size_t start = 0;
  bool first = true;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (first && cells[0] == "id") {
      first = false;
      continue;
    }
    first = false;
    if (cells.size() < 2) throw DataError("feature row without values");
    ids.emplace_back(cells[0]);
    std::vector<double> v;
    for (std::size_t k = 1; k < cells.size(); ++k) v.push_back(parse_double(cells[k]));
    if (!rows.empty() && v.size() != rows.front().size()) throw DataError("feature vectors have unequal dimension");
    rows.push_back(std::move(v));
  }
  if (rows.empty()) throw DataError("feature table is empty");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return FeatureTable(std::move(ids), std::move(m));
}

FeatureTable load_feature_table(const std::filesystem::path& path) { return parse_feature_table(read_file(path)); }

void save_feature_table(const FeatureTable& t, const std::filesystem::path& path) {
  std::string out = "id";
  for (Eigen::Index k = 0; k < t.dim(); ++k) out += ",v" + std::to_string(k + 1);
  out += '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    out += t.ids()[i];
    for (Eigen::Index k = 0; k < t.dim(); ++k) out += "," + format_double(t.vectors()(static_cast<Eigen::Index>(i), k));
    out += '\n';
  }
  write_file(path, out);
}

Eigen::VectorXd mean_feature(const FeatureTable& per_example, const std::vector<std::string>& example_ids) {
  if (example_ids.empty()) throw std::invalid_argument("mean feature of an empty example list");
  return per_example.gather(example_ids).colwise().mean().transpose();
}

// ---------------------------------------------------------------- regressor

namespace {

struct Adam {
  double lr;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  template <class Param>
  void update(Param& p, const Param& g, Param& m, Param& v) const {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

Eigen::MatrixXd he_normal(Eigen::Index out, Eigen::Index in, Rng& rng) {
  const double sd = std::sqrt(2.0 / static_cast<double>(in));
  return Eigen::MatrixXd::NullaryExpr(out, in, [&] { return rng.normal(0.0, sd); });
}

}  // namespace

Eigen::MatrixXd FeatureRegressor::forward(const Tower& t, const Eigen::MatrixXd& x, Eigen::MatrixXd* pre) {
  Eigen::MatrixXd h = x * t.w1.transpose();
  h.rowwise() += t.b1.transpose();
  if (pre) *pre = h;
  h = h.cwiseMax(0.0);
  Eigen::MatrixXd y = h * t.w2.transpose();
  y.rowwise() += t.b2.transpose();
  return y;
}

void FeatureRegressor::fit(const Eigen::MatrixXd& task_vectors, const Eigen::MatrixXd& example_vectors,
                           const Eigen::MatrixXd& targets, const std::optional<Mask>& observed) {
  if (targets.rows() != task_vectors.rows() || targets.cols() != example_vectors.rows())
    throw std::invalid_argument("feature regressor: target shape does not match feature counts");
  if (cfg_.hidden < 1 || cfg_.output < 1 || cfg_.epochs < 0) throw std::invalid_argument("bad feature model config");
  const Eigen::MatrixXd weight =
      observed ? Eigen::MatrixXd(observed->cast<double>().matrix()) : Eigen::MatrixXd::Ones(targets.rows(), targets.cols());
  const double n_obs = weight.sum();
  if (n_obs <= 0.0) throw std::invalid_argument("feature regressor: no observed targets");

  Rng rng(cfg_.seed);
  task_.w1 = he_normal(cfg_.hidden, task_vectors.cols(), rng);
  task_.b1 = Eigen::VectorXd::Zero(cfg_.hidden);
  task_.w2 = Eigen::MatrixXd::Zero(cfg_.output, cfg_.hidden);
  task_.b2 = Eigen::VectorXd::Zero(cfg_.output);
  example_.w1 = he_normal(cfg_.hidden, example_vectors.cols(), rng);
  example_.b1 = Eigen::VectorXd::Zero(cfg_.hidden);
  example_.w2 = he_normal(cfg_.output, cfg_.hidden, rng) / std::sqrt(static_cast<double>(cfg_.output));
  example_.b2 = Eigen::VectorXd::Zero(cfg_.output);

  Tower m_task{Eigen::MatrixXd::Zero(task_.w1.rows(), task_.w1.cols()), Eigen::MatrixXd::Zero(task_.w2.rows(), task_.w2.cols()),
               Eigen::VectorXd::Zero(task_.b1.size()), Eigen::VectorXd::Zero(task_.b2.size())};
  Tower v_task = m_task;
  Tower m_ex{Eigen::MatrixXd::Zero(example_.w1.rows(), example_.w1.cols()),
             Eigen::MatrixXd::Zero(example_.w2.rows(), example_.w2.cols()), Eigen::VectorXd::Zero(example_.b1.size()),
             Eigen::VectorXd::Zero(example_.b2.size())};
  Tower v_ex = m_ex;
  Adam adam{cfg_.learning_rate};

  auto backward = [](const Tower& t, const Eigen::MatrixXd& x, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& dy) {
    Tower g;
    const Eigen::MatrixXd h = pre.cwiseMax(0.0);
    g.w2 = dy.transpose() * h;
    g.b2 = dy.colwise().sum().transpose();
    Eigen::MatrixXd dh = dy * t.w2;
    dh = dh.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    g.w1 = dh.transpose() * x;
    g.b1 = dh.colwise().sum().transpose();
    return g;
  };
  auto step_tower = [&](Tower& t, const Tower& g, Tower& m, Tower& v) {
    adam.update(t.w1, g.w1, m.w1, v.w1);
    adam.update(t.w2, g.w2, m.w2, v.w2);
    adam.update(t.b1, g.b1, m.b1, v.b1);
    adam.update(t.b2, g.b2, m.b2, v.b2);
  };

  Eigen::MatrixXd pre_task, pre_ex;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    const Eigen::MatrixXd yt = forward(task_, task_vectors, &pre_task);
    const Eigen::MatrixXd ye = forward(example_, example_vectors, &pre_ex);
    const Eigen::MatrixXd resid = (yt * ye.transpose() - targets).cwiseProduct(weight);
    final_loss_ = resid.squaredNorm() / n_obs;
    if (!std::isfinite(final_loss_)) throw std::runtime_error("feature regressor diverged");
    const Eigen::MatrixXd dp = (2.0 / n_obs) * resid;
    const Tower g_task = backward(task_, task_vectors, pre_task, dp * ye);
    const Tower g_ex = backward(example_, example_vectors, pre_ex, dp.transpose() * yt);
    ++adam.step;
    step_tower(task_, g_task, m_task, v_task);
    step_tower(example_, g_ex, m_ex, v_ex);
  }
  example_out_ = forward(example_, example_vectors);
  const Eigen::MatrixXd resid = (forward(task_, task_vectors) * example_out_.transpose() - targets).cwiseProduct(weight);
  final_loss_ = resid.squaredNorm() / n_obs;
}

Eigen::MatrixXd FeatureRegressor::predict(const Eigen::MatrixXd& task_vectors) const {
  if (example_out_.size() == 0) throw std::logic_error("feature regressor used before fit");
  return forward(task_, task_vectors) * example_out_.transpose();
}

Eigen::VectorXd FeatureRegressor::predict_row(const Eigen::VectorXd& task_vector) const {
  return predict(task_vector.transpose()).row(0).transpose();
}

// ---------------------------------------------------------------- predictors

namespace {

void check_dims(const FeatureTable& task_feats, const FeatureTable& example_feats) {
  if (task_feats.size() == 0 || example_feats.size() == 0) throw DataError("empty feature table");
}

}  // namespace

RowPrediction predict_features(const AssociationMatrix& train, const FeatureTable& task_feats,
                               const FeatureTable& example_feats, const std::string& new_task_id,
                               const FeatureModelConfig& cfg) {
  check_dims(task_feats, example_feats);
  const Eigen::MatrixXd tasks = task_feats.gather(train.task_ids());
  const Eigen::MatrixXd examples = example_feats.gather(train.example_ids());
  const Eigen::VectorXd target_task = task_feats.row(new_task_id);
  FeatureRegressor reg(cfg);
  reg.fit(tasks, examples, train.values(), train.observed());
  RowPrediction out;
  out.values = reg.predict_row(target_task);
  return out;
}

RowPrediction predict_residual(const AssociationMatrix& train, const SeedSet& seed, const FeatureTable& task_feats,
                               const FeatureTable& example_feats, const std::string& new_task_id, ResidualBase base,
                               const FeatureModelConfig& cfg, const MfOptions& mf) {
  check_dims(task_feats, example_feats);
  RowPrediction base_pred;
  Eigen::MatrixXd train_fit;
  if (base == ResidualBase::Additive) {
    AdditiveCompleter completer(train);
    base_pred = completer.predict(seed);
    train_fit = completer.train_fit();
  } else {
    MfCompleter completer(train, mf);
    base_pred = completer.predict(seed);
    train_fit = completer.train_fit();
  }
  const Eigen::MatrixXd residual = train.values() - train_fit;
  FeatureRegressor reg(cfg);
  reg.fit(task_feats.gather(train.task_ids()), example_feats.gather(train.example_ids()), residual, train.observed());

  RowPrediction out;
  out.notes = std::move(base_pred.notes);
  out.values = base_pred.values + reg.predict_row(task_feats.row(new_task_id));
  overwrite_seed(out.values, seed);
  return out;
}

}  // namespace amnesia
