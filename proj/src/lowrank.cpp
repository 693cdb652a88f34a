#include "amnesia/lowrank.hpp"

#include "amnesia/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace amnesia {

const char* to_string(Link link) { return link == Link::Logistic ? "logistic" : "identity"; }

Link parse_link(const std::string& text) {
  if (text == "identity") return Link::Identity;
  if (text == "logistic") return Link::Logistic;
  throw std::invalid_argument("unknown link '" + text + "' (expected identity|logistic)");
}

Eigen::MatrixXd FactorModel::linear_predictor() const {
  Eigen::MatrixXd u = task_factors * example_factors.transpose();
  if (u.rows() != tasks() || u.cols() != examples()) u = Eigen::MatrixXd::Zero(tasks(), examples());
  if (task_bias) u.colwise() += *task_bias;
  if (example_bias) u.rowwise() += example_bias->transpose();
  return u;
}

Eigen::MatrixXd FactorModel::predict() const {
  Eigen::MatrixXd u = linear_predictor();
  if (link == Link::Logistic) u = u.unaryExpr([](double x) { return sigmoid(x); });
  return u;
}

void FactorModel::validate() const {
  if (task_factors.cols() != example_factors.cols()) throw DataError("factor tables disagree on rank");
  if (task_bias && task_bias->size() != tasks()) throw DataError("task bias length mismatch");
  if (example_bias && example_bias->size() != examples()) throw DataError("example bias length mismatch");
}

namespace {

void require_rank(const AssociationMatrix& m, int rank) {
  if (rank < 1 || rank > std::min(m.rows(), m.cols()))
    throw std::invalid_argument("rank " + std::to_string(rank) + " outside [1, min(M,N)]");
}

void require_nonempty_lines(const AssociationMatrix& m) {
  const auto& obs = m.observed();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    if (!obs.row(i).any()) throw DataError("task row " + m.task_ids()[i] + " has no observed entries");
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (!obs.col(j).any()) throw DataError("example column " + m.example_ids()[j] + " has no observed entries");
}

double softplus(double u) { return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

}  // namespace

Eigen::VectorXd singular_values(const AssociationMatrix& m) {
  if (!m.fully_observed()) throw std::invalid_argument("singular values need a fully observed matrix");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m.values());
  return svd.singularValues();
}

FactorModel fit_svd(const AssociationMatrix& m, int rank) {
  if (!m.fully_observed()) throw std::invalid_argument("fit_svd requires a fully observed matrix");
  if (m.kind() != ValueKind::Continuous) throw std::invalid_argument("fit_svd requires a continuous matrix");
  require_rank(m, rank);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(m.values(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  FactorModel f;
  f.task_factors = svd.matrixU().leftCols(rank) * svd.singularValues().head(rank).asDiagonal();
  f.example_factors = svd.matrixV().leftCols(rank);
  f.link = Link::Identity;
  return f;
}

GdFit fit_gd(const AssociationMatrix& m, int rank, const FitConfig& cfg) {
  if (rank < 1) throw std::invalid_argument("fit_gd rank must be >= 1");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (!(cfg.learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  require_nonempty_lines(m);

  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  const Eigen::MatrixXd weight = m.observed().cast<double>().matrix();
  const Eigen::MatrixXd& z = m.values();
  const double n_obs = static_cast<double>(m.observed_count());
  const Eigen::VectorXd row_count = weight.rowwise().sum();
  const Eigen::VectorXd col_count = weight.colwise().sum().transpose();
  const bool logistic = cfg.link == Link::Logistic;

  Rng rng(cfg.seed);
  const double scale = cfg.init_scale / std::sqrt(static_cast<double>(rank));
  FactorModel f;
  f.link = cfg.link;
  f.task_factors = Eigen::MatrixXd::NullaryExpr(rows, rank, [&] { return rng.normal(0.0, scale); });
  f.example_factors = Eigen::MatrixXd::NullaryExpr(cols, rank, [&] { return rng.normal(0.0, scale); });
  if (cfg.use_bias) {
    f.task_bias = Eigen::VectorXd::Zero(rows);
    f.example_bias = Eigen::VectorXd::Zero(cols);
  }

  auto objective = [&](const FactorModel& g) {
    const Eigen::MatrixXd u = g.linear_predictor();
    double loss = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (weight(i, j) == 0.0) continue;
        if (logistic) {
          loss += softplus(u(i, j)) - z(i, j) * u(i, j);
        } else {
          const double e = z(i, j) - u(i, j);
          loss += e * e;
        }
      }
    }
    return loss / n_obs + cfg.l2 * (g.task_factors.squaredNorm() / static_cast<double>(rows) +
                                    g.example_factors.squaredNorm() / static_cast<double>(cols));
  };

  GdFit out;
  double current = objective(f);
  if (!std::isfinite(current)) throw NonFiniteError("non-finite objective at initialization", 0);
  out.objective_trace.push_back(current);
  double step = cfg.learning_rate;

  int epoch = 0;
  for (; epoch < cfg.epochs; ++epoch) {
    const Eigen::MatrixXd u = f.linear_predictor();
    Eigen::MatrixXd dloss(rows, cols);
    if (logistic) {
      dloss = u.unaryExpr([](double x) { return sigmoid(x); }) - z;
    } else {
      dloss = 2.0 * (u - z);
    }
    dloss = dloss.cwiseProduct(weight);
    if (!dloss.allFinite()) throw NonFiniteError("non-finite gradient at epoch " + std::to_string(epoch + 1), epoch + 1);

    // Row-preconditioned directions: per-row mean loss gradient plus the
    // matching share of the L2 term.
    Eigen::MatrixXd dir_task = dloss * f.example_factors;
    Eigen::MatrixXd dir_example = dloss.transpose() * f.task_factors;
    for (Eigen::Index i = 0; i < rows; ++i) {
      dir_task.row(i) = (dir_task.row(i) + 2.0 * cfg.l2 * n_obs / static_cast<double>(rows) * f.task_factors.row(i)) /
                        row_count[i];
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      dir_example.row(j) =
          (dir_example.row(j) + 2.0 * cfg.l2 * n_obs / static_cast<double>(cols) * f.example_factors.row(j)) /
          col_count[j];
    }
    Eigen::VectorXd dir_task_bias, dir_example_bias;
    if (cfg.use_bias) {
      dir_task_bias = dloss.rowwise().sum().cwiseQuotient(row_count);
      dir_example_bias = dloss.colwise().sum().transpose().cwiseQuotient(col_count);
    }

    FactorModel trial = f;
    double next = current;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      trial.task_factors = f.task_factors - step * dir_task;
      trial.example_factors = f.example_factors - step * dir_example;
      if (cfg.use_bias) {
        *trial.task_bias = *f.task_bias - step * dir_task_bias;
        *trial.example_bias = *f.example_bias - step * dir_example_bias;
      }
      next = objective(trial);
      if (!std::isfinite(next) && halvings == 59)
        throw NonFiniteError("non-finite objective at epoch " + std::to_string(epoch + 1), epoch + 1);
      if (std::isfinite(next) && next <= current) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent left at machine precision
    f = std::move(trial);
    current = next;
    out.objective_trace.push_back(current);
    step = std::min(cfg.learning_rate, 2.0 * step);
  }

  out.model = std::move(f);
  out.report = goodness_of_fit(m, out.model);
  out.report.epochs_run = epoch;
  out.report.final_objective = current;
  return out;
}

FactorModel fit_additive(const AssociationMatrix& m, double tolerance, int max_iterations) {
  require_nonempty_lines(m);
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  const Eigen::MatrixXd weight = m.observed().cast<double>().matrix();
  const Eigen::MatrixXd zw = m.values().cwiseProduct(weight);
  const Eigen::VectorXd row_count = weight.rowwise().sum();
  const Eigen::VectorXd col_count = weight.colwise().sum().transpose();

  Eigen::VectorXd a = Eigen::VectorXd::Zero(rows);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(cols);
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd a_next = (zw.rowwise().sum() - weight * b).cwiseQuotient(row_count);
    const Eigen::VectorXd b_next = (zw.colwise().sum().transpose() - weight.transpose() * a_next).cwiseQuotient(col_count);
    const double change = std::max((a_next - a).cwiseAbs().maxCoeff(), (b_next - b).cwiseAbs().maxCoeff());
    a = a_next;
    b = b_next;
    if (change <= tolerance) break;
  }

  const double shift = b.mean();
  b.array() -= shift;
  a.array() += shift;

  FactorModel f;
  f.task_factors = Eigen::MatrixXd::Zero(rows, 0);
  f.example_factors = Eigen::MatrixXd::Zero(cols, 0);
  f.task_bias = std::move(a);
  f.example_bias = std::move(b);
  return f;
}

double r_squared(const AssociationMatrix& m, const Eigen::MatrixXd& predicted) {
  if (predicted.rows() != m.rows() || predicted.cols() != m.cols())
    throw std::invalid_argument("prediction shape does not match the matrix");
  const auto& obs = m.observed();
  double sum = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (obs(i, j)) sum += m(i, j);
  const double mean = sum / static_cast<double>(m.observed_count());
  double ss_res = 0.0, ss_tot = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!obs(i, j)) continue;
      const double r = m(i, j) - predicted(i, j);
      const double d = m(i, j) - mean;
      ss_res += r * r;
      ss_tot += d * d;
    }
  }
  if (ss_tot == 0.0) throw std::domain_error("R^2 undefined: observed values have zero variance");
  return 1.0 - ss_res / ss_tot;
}

double f1_score(std::span<const double> truth, std::span<const double> predicted, double threshold) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("f1: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const bool actual = truth[k] >= 0.5;
    const bool guess = predicted[k] >= threshold;
    if (actual && guess) ++tp;
    if (!actual && guess) ++fp;
    if (actual && !guess) ++fn;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  // No positives anywhere and none predicted: a perfect negative call.
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * tp) / static_cast<double>(denom);
}

FitReport goodness_of_fit(const AssociationMatrix& m, const FactorModel& f) {
  f.validate();
  if (f.tasks() != m.rows() || f.examples() != m.cols())
    throw std::invalid_argument("factor model dimensions do not match the matrix");
  const Eigen::MatrixXd pred = f.predict();

  FitReport report;
  report.r2 = r_squared(m, pred);
  double ss = 0.0;
  std::vector<double> truth, guess;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!m.is_observed(i, j)) continue;
      const double r = m(i, j) - pred(i, j);
      ss += r * r;
      if (m.kind() == ValueKind::Binary) {
        truth.push_back(m(i, j));
        guess.push_back(pred(i, j));
      }
    }
  }
  report.frobenius_error = std::sqrt(ss);
  if (m.kind() == ValueKind::Binary) report.f1 = f1_score(truth, guess);
  return report;
}

std::vector<std::pair<int, FitReport>> rank_sweep(const AssociationMatrix& m, std::span<const int> ranks,
                                                  const FitConfig& cfg) {
  std::vector<int> sorted(ranks.begin(), ranks.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<std::pair<int, FitReport>> out;
  if (m.kind() == ValueKind::Continuous && m.fully_observed()) {
    for (int r : sorted) require_rank(m, r);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m.values(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    for (int r : sorted) {
      FactorModel f;
      f.task_factors = svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal();
      f.example_factors = svd.matrixV().leftCols(r);
      out.emplace_back(r, goodness_of_fit(m, f));
    }
    return out;
  }

  FitConfig gd = cfg;
  if (m.kind() == ValueKind::Binary) gd.link = Link::Logistic;
  for (int r : sorted) out.emplace_back(r, fit_gd(m, r, gd).report);
  return out;
}

Eigen::MatrixXd component(const FactorModel& f, int k) {
  if (k < 1 || k > f.rank()) throw std::out_of_range("component index outside [1, rank]");
  if (f.link != Link::Identity) throw std::invalid_argument("components are defined for the identity link only");
  return f.task_factors.col(k - 1) * f.example_factors.col(k - 1).transpose();
}

}  // namespace amnesia
