#include "amnesia/completion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace amnesia {

void SeedSet::validate(Eigen::Index columns) const {
  if (indices.empty()) throw std::invalid_argument("seed set is empty");
  if (static_cast<Eigen::Index>(indices.size()) != values.size())
    throw std::invalid_argument("seed index and value counts differ");
  std::vector<Eigen::Index> sorted(indices);
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("seed indices are not distinct");
  if (sorted.front() < 0 || sorted.back() >= columns) throw std::out_of_range("seed index outside [0, N)");
  if (!values.allFinite()) throw std::invalid_argument("seed values must be finite");
}

SeedSet SeedSet::draw(const Eigen::VectorXd& row, std::size_t size, Rng& rng) {
  if (size == 0) throw std::invalid_argument("seed size must be positive");
  if (size >= static_cast<std::size_t>(row.size())) throw std::invalid_argument("seed size must be below N");
  SeedSet seed;
  const auto picks = rng.sample_without_replacement(static_cast<std::size_t>(row.size()), size);
  seed.indices.assign(picks.begin(), picks.end());
  seed.values.resize(static_cast<Eigen::Index>(size));
  for (std::size_t k = 0; k < size; ++k) seed.values[static_cast<Eigen::Index>(k)] = row[seed.indices[k]];
  return seed;
}

void overwrite_seed(Eigen::VectorXd& row, const SeedSet& seed) {
  for (std::size_t k = 0; k < seed.size(); ++k) row[seed.indices[k]] = seed.values[static_cast<Eigen::Index>(k)];
}

namespace {

void require_full(const AssociationMatrix& train, const char* who) {
  if (!train.fully_observed()) throw std::invalid_argument(std::string(who) + " requires fully observed training rows");
}

}  // namespace

// ---------------------------------------------------------------- additive

AdditiveCompleter::AdditiveCompleter(const AssociationMatrix& train) : model_(fit_additive(train)) {
  example_bias_ = *model_.example_bias;
}

RowPrediction AdditiveCompleter::predict(const SeedSet& seed) const {
  seed.validate(example_bias_.size());
  double offset = 0.0;
  for (std::size_t k = 0; k < seed.size(); ++k)
    offset += seed.values[static_cast<Eigen::Index>(k)] - example_bias_[seed.indices[k]];
  offset /= static_cast<double>(seed.size());
  RowPrediction out;
  out.values = example_bias_.array() + offset;
  overwrite_seed(out.values, seed);
  return out;
}

Eigen::MatrixXd AdditiveCompleter::train_fit() const { return model_.predict(); }

// ---------------------------------------------------------------- knn

KnnCompleter::KnnCompleter(const AssociationMatrix& train, KnnOptions options) : options_(options) {
  require_full(train, "KNN");
  if (options_.k < 1) throw std::invalid_argument("KNN k must be >= 1");
  // Merge bit-identical rows.
  std::map<std::vector<double>, Eigen::Index> seen;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    const Eigen::VectorXd r = train.values().row(i).transpose();
    std::vector<double> key(r.data(), r.data() + r.size());
    if (seen.emplace(std::move(key), i).second) keep.push_back(i);
  }
  rows_.resize(static_cast<Eigen::Index>(keep.size()), train.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) rows_.row(static_cast<Eigen::Index>(r)) = train.values().row(keep[r]);
}

RowPrediction KnnCompleter::predict(const SeedSet& seed) const {
  seed.validate(rows_.cols());
  RowPrediction out;
  const std::size_t s = seed.size();
  const std::vector<double> target(seed.values.data(), seed.values.data() + s);

  bool seed_constant = std::all_of(target.begin(), target.end(), [&](double v) { return v == target.front(); });
  if (s < 2) seed_constant = true;
  if (seed_constant) out.notes.push_back("seed values have zero variance; similarity fell back to cosine");

  const Eigen::Index count = rows_.rows();
  std::vector<double> similarity(static_cast<std::size_t>(count), 0.0);
  std::vector<double> candidate(s);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < s; ++k) candidate[k] = rows_(i, seed.indices[k]);
    double sim = 0.0;
    if (seed_constant) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t k = 0; k < s; ++k) {
        dot += candidate[k] * target[k];
        na += candidate[k] * candidate[k];
        nb += target[k] * target[k];
      }
      sim = (na > 0.0 && nb > 0.0) ? dot / std::sqrt(na * nb) : 0.0;
    } else {
      try {
        sim = options_.similarity == stats::Correlation::Pearson ? stats::pearson(candidate, target)
                                                                 : stats::spearman(candidate, target);
      } catch (const std::domain_error&) {
        sim = 0.0;  // constant training row over the seed columns
      }
    }
    similarity[static_cast<std::size_t>(i)] = sim;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return similarity[static_cast<std::size_t>(a)] > similarity[static_cast<std::size_t>(b)];
  });
  const auto top = std::min<std::size_t>(static_cast<std::size_t>(options_.k), order.size());

  double weight_sum = 0.0;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(rows_.cols());
  for (std::size_t r = 0; r < top; ++r) {
    const double w = std::max(similarity[static_cast<std::size_t>(order[r])], 0.0);
    if (w <= 0.0) continue;
    acc += w * rows_.row(order[r]).transpose();
    weight_sum += w;
  }
  if (weight_sum > 0.0) {
    out.values = acc / weight_sum;
  } else {
    out.notes.push_back("no neighbour with positive similarity; used the unweighted top-k mean");
    acc.setZero();
    for (std::size_t r = 0; r < top; ++r) acc += rows_.row(order[r]).transpose();
    out.values = acc / static_cast<double>(top);
  }
  overwrite_seed(out.values, seed);
  return out;
}

// ---------------------------------------------------------------- mf

MfCompleter::MfCompleter(const AssociationMatrix& train, MfOptions options) : options_(options) {
  if (options_.rank < 1) throw std::invalid_argument("MF rank must be >= 1");
  if (!(options_.lambda >= 0.0)) throw std::invalid_argument("MF lambda must be non-negative");
  int rank = options_.rank;
  const auto max_rank = static_cast<int>(std::min(train.rows(), train.cols()));
  if (rank > max_rank) {
    fit_notes_.push_back("rank " + std::to_string(rank) + " clamped to " + std::to_string(max_rank));
    rank = max_rank;
  }
  if (train.kind() == ValueKind::Continuous && train.fully_observed()) {
    model_ = fit_svd(train, rank);
  } else {
    FitConfig cfg = options_.fit;
    cfg.link = train.kind() == ValueKind::Binary ? Link::Logistic : Link::Identity;
    cfg.use_bias = false;
    model_ = fit_gd(train, rank, cfg).model;
  }
  // Re-gauge: unit RMS task factors per component, predictions unchanged.
  const double rows = static_cast<double>(train.rows());
  const double largest = model_.task_factors.colwise().norm().maxCoeff() / std::sqrt(rows);
  for (int k = 0; k < model_.rank(); ++k) {
    const double rms = model_.task_factors.col(k).norm() / std::sqrt(rows);
    if (!(rms > 1e-12 * largest)) {
      // Numerically absent component: keep it out of the fold-in basis.
      model_.task_factors.col(k).setZero();
      model_.example_factors.col(k).setZero();
      continue;
    }
    model_.task_factors.col(k) /= rms;
    model_.example_factors.col(k) *= rms;
  }
}

Eigen::VectorXd MfCompleter::fold_in(const SeedSet& seed) const {
  seed.validate(model_.examples());
  const auto r = static_cast<Eigen::Index>(model_.rank());
  const auto s = static_cast<Eigen::Index>(seed.size());
  Eigen::MatrixXd basis(s, r);
  for (Eigen::Index k = 0; k < s; ++k) basis.row(k) = model_.example_factors.row(seed.indices[k]);
  const Eigen::MatrixXd ridge = options_.lambda * Eigen::MatrixXd::Identity(r, r);

  if (model_.link == Link::Identity) {
    const Eigen::MatrixXd normal = basis.transpose() * basis + ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    Eigen::VectorXd alpha = ldlt.solve(basis.transpose() * seed.values);
    if (ldlt.info() != Eigen::Success || !alpha.allFinite())
      throw std::runtime_error("MF fold-in: singular normal equations");
    return alpha;
  }

  // min sum CE(z, sigmoid(B alpha)) + lambda |alpha|^2
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(r);
  for (int it = 0; it < options_.newton_max_iterations; ++it) {
    const Eigen::VectorXd u = basis * alpha;
    const Eigen::VectorXd p = u.unaryExpr([](double x) { return sigmoid(x); });
    const Eigen::VectorXd grad = basis.transpose() * (p - seed.values) + 2.0 * options_.lambda * alpha;
    const Eigen::VectorXd w = p.array() * (1.0 - p.array());
    const Eigen::MatrixXd hess = basis.transpose() * w.asDiagonal() * basis + 2.0 * ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    const Eigen::VectorXd delta = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !delta.allFinite())
      throw std::runtime_error("MF fold-in: singular Newton system");
    alpha -= delta;
    if (delta.norm() <= options_.newton_tolerance) break;
  }
  return alpha;
}

RowPrediction MfCompleter::predict(const SeedSet& seed) const {
  RowPrediction out;
  out.notes = fit_notes_;
  if (static_cast<int>(seed.size()) < model_.rank())
    out.notes.push_back("seed size " + std::to_string(seed.size()) + " is below the rank " +
                        std::to_string(model_.rank()));
  const Eigen::VectorXd alpha = fold_in(seed);
  out.values = model_.example_factors * alpha;
  if (model_.link == Link::Logistic) out.values = out.values.unaryExpr([](double x) { return sigmoid(x); });
  overwrite_seed(out.values, seed);
  return out;
}

// ---------------------------------------------------------------- wrappers

RowPrediction predict_additive(const AssociationMatrix& train, const SeedSet& seed) {
  require_full(train, "additive prediction");
  return AdditiveCompleter(train).predict(seed);
}

RowPrediction predict_knn(const AssociationMatrix& train, const SeedSet& seed, int k, stats::Correlation similarity) {
  return KnnCompleter(train, {k, similarity}).predict(seed);
}

RowPrediction predict_mf(const AssociationMatrix& train, const SeedSet& seed, int rank, double lambda) {
  MfOptions options;
  options.rank = rank;
  options.lambda = lambda;
  return MfCompleter(train, options).predict(seed);
}

}  // namespace amnesia
