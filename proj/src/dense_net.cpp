#include "amnesia/dense_net.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace amnesia {

DenseNet::DenseNet(int inputs, int width, int depth, int classes, Rng& rng) {
  if (depth < 1) throw std::invalid_argument("network depth must be >= 1");
  if (inputs < 1 || classes < 2 || (depth > 1 && width < 1)) throw std::invalid_argument("bad network widths");
  int fan_in = inputs;
  for (int l = 0; l < depth; ++l) {
    const int fan_out = l + 1 == depth ? classes : width;
    // He initialization for ReLU layers.
    const double scale = std::sqrt(2.0 / fan_in);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * rng.normal();
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(fan_out));
    fan_in = fan_out;
  }
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

Eigen::MatrixXd DenseNet::logits(const Eigen::MatrixXd& x) const {
  if (x.rows() != inputs()) throw std::invalid_argument("input width does not match the network");
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = weights_[l] * h;
    z.colwise() += biases_[l];
    h = l + 1 < weights_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

double cross_entropy(const Eigen::VectorXd& logits, int label) {
  const double hi = logits.maxCoeff();
  return hi + std::log((logits.array() - hi).exp().sum()) - logits[label];
}

namespace {

void check_labels(std::span<const int> labels, Eigen::Index cols, int classes) {
  if (static_cast<Eigen::Index>(labels.size()) != cols) throw std::invalid_argument("label count does not match inputs");
  for (int l : labels)
    if (l < 0 || l >= classes) throw std::invalid_argument("label " + std::to_string(l) + " out of range");
}

}  // namespace

Eigen::VectorXd DenseNet::losses(const Eigen::MatrixXd& x, std::span<const int> labels) const {
  check_labels(labels, x.cols(), classes());
  const Eigen::MatrixXd z = logits(x);
  Eigen::VectorXd out(z.cols());
  for (Eigen::Index i = 0; i < z.cols(); ++i) out[i] = cross_entropy(z.col(i), labels[static_cast<std::size_t>(i)]);
  if (!out.allFinite()) throw std::runtime_error("non-finite loss");
  return out;
}

double DenseNet::accuracy(const Eigen::MatrixXd& x, std::span<const int> labels) const {
  check_labels(labels, x.cols(), classes());
  const Eigen::MatrixXd z = logits(x);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    Eigen::Index arg;
    z.col(i).maxCoeff(&arg);
    correct += arg == labels[static_cast<std::size_t>(i)];
  }
  return z.cols() ? static_cast<double>(correct) / static_cast<double>(z.cols()) : 0.0;
}

DenseNet::Grads DenseNet::backprop(const Eigen::MatrixXd& x, std::span<const int> labels) const {
  check_labels(labels, x.cols(), classes());
  if (x.rows() != inputs()) throw std::invalid_argument("input width does not match the network");
  const std::size_t depth = weights_.size();
  const double n = static_cast<double>(x.cols());

  std::vector<Eigen::MatrixXd> acts{x};
  acts.reserve(depth + 1);
  for (std::size_t l = 0; l < depth; ++l) {
    Eigen::MatrixXd z = weights_[l] * acts.back();
    z.colwise() += biases_[l];
    acts.push_back(l + 1 < depth ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z);
  }

  // dL/dlogits = softmax - onehot, averaged over the batch.
  Eigen::MatrixXd delta = acts.back();
  double total = 0.0;
  for (Eigen::Index i = 0; i < delta.cols(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const double hi = delta.col(i).maxCoeff();
    Eigen::VectorXd p = (delta.col(i).array() - hi).exp();
    const double s = p.sum();
    total += hi + std::log(s) - delta(y, i);
    p /= s;
    p[y] -= 1.0;
    delta.col(i) = p / n;
  }
  if (!std::isfinite(total)) throw std::runtime_error("non-finite loss");

  Grads g;
  g.w.resize(depth);
  g.b.resize(depth);
  g.mean_loss = total / n;
  for (std::size_t l = depth; l-- > 0;) {
    g.w[l] = delta * acts[l].transpose();
    g.b[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = weights_[l].transpose() * delta;
      delta = (acts[l].array() > 0.0).select(back, 0.0);
    }
  }
  return g;
}

Eigen::VectorXd DenseNet::gradient(const Eigen::MatrixXd& x, std::span<const int> labels) const {
  const Grads g = backprop(x, labels);
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    for (Eigen::Index r = 0; r < g.w[l].rows(); ++r)
      for (Eigen::Index c = 0; c < g.w[l].cols(); ++c) flat[k++] = g.w[l](r, c);
    flat.segment(k, g.b[l].size()) = g.b[l];
    k += g.b[l].size();
  }
  return flat;
}

double DenseNet::sgd_step(const Eigen::MatrixXd& x, std::span<const int> labels, double lr) {
  if (x.cols() == 0) return 0.0;
  const Grads g = backprop(x, labels);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] -= lr * g.w[l];
    biases_[l] -= lr * g.b[l];
  }
  return g.mean_loss;
}

Eigen::VectorXd DenseNet::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) flat[k++] = weights_[l](r, c);
    flat.segment(k, biases_[l].size()) = biases_[l];
    k += biases_[l].size();
  }
  return flat;
}

void DenseNet::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) throw std::invalid_argument("parameter count mismatch");
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) weights_[l](r, c) = flat[k++];
    biases_[l] = flat.segment(k, biases_[l].size());
    k += biases_[l].size();
  }
}

std::uint64_t DenseNet::fingerprint() const {
  // FNV-1a over the raw parameter bytes.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const Eigen::VectorXd flat = flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &flat[i], sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

Eigen::VectorXd per_example_gradient(const DenseNet& net, const Eigen::VectorXd& x, int label) {
  if (!x.allFinite()) throw std::runtime_error("non-finite input");
  const Eigen::MatrixXd col = x;
  const int labels[1] = {label};
  Eigen::VectorXd g = net.gradient(col, labels);
  if (!g.allFinite()) throw std::runtime_error("non-finite gradient");
  return g;
}

}  // namespace amnesia
