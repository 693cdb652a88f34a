#pragma once

#include "amnesia/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace amnesia {

/// Fully connected classifier with ReLU hidden layers and a softmax
/// cross-entropy loss. Depth counts weight layers, so depth 1 is linear.
class DenseNet {
 public:
  DenseNet() = default;
  DenseNet(int inputs, int width, int depth, int classes, Rng& rng);

  int depth() const { return static_cast<int>(weights_.size()); }
  int inputs() const { return static_cast<int>(weights_.front().cols()); }
  int classes() const { return static_cast<int>(weights_.back().rows()); }
  std::size_t parameter_count() const;

  // Columns of x are examples.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd losses(const Eigen::MatrixXd& x, std::span<const int> labels) const;
  double accuracy(const Eigen::MatrixXd& x, std::span<const int> labels) const;

  // Gradient of the mean loss over the batch, in flat parameter order.
  Eigen::VectorXd gradient(const Eigen::MatrixXd& x, std::span<const int> labels) const;
  // One plain SGD update on the mean batch loss; returns the batch's mean loss
  // before the update.
  double sgd_step(const Eigen::MatrixXd& x, std::span<const int> labels, double lr);

  // Flat order: for each layer, W row-major then b.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  std::uint64_t fingerprint() const;

  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

 private:
  struct Grads {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
    double mean_loss = 0.0;
  };
  Grads backprop(const Eigen::MatrixXd& x, std::span<const int> labels) const;

  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

// Per-example cross-entropy from a column of logits.
double cross_entropy(const Eigen::VectorXd& logits, int label);

/// Gradient of one example's loss with respect to every parameter.
Eigen::VectorXd per_example_gradient(const DenseNet& net, const Eigen::VectorXd& x, int label);

}  // namespace amnesia
