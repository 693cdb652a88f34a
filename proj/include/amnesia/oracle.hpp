#pragma once

#include "amnesia/association_matrix.hpp"
#include "amnesia/dense_net.hpp"
#include "amnesia/replay.hpp"
#include "amnesia/rotation.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace amnesia {

enum class DataSource { Idx, SyntheticBlobs };

const char* to_string(DataSource s);
DataSource parse_data_source(const std::string& text);

/// Procedural 28x28 digit stand-ins: each class is a fixed arrangement of
/// Gaussian blobs; examples jitter blob positions and brightness and add
/// pixel noise.
struct BlobOptions {
  int side = 28;
  int blobs_per_class = 4;
  double radius_min = 3.0;  // blob distance from the image center, pixels
  double radius_max = 11.0;
  double sigma_min = 1.3;
  double sigma_max = 2.6;
  double position_jitter = 1.0;
  double amplitude_jitter = 0.2;
  double noise = 0.05;
  double ring_amplitude = 0.0;  // class-specific ring, unchanged by rotation
  double ring_min = 3.0;
  double ring_max = 11.0;
  double ring_width = 0.8;
  int ring_groups = 10;  // distinct ring radii
  double max_mix = 0.0;  // largest weight given to a second class's prototype
  double mix_power = 2.0;
  std::size_t base_size = 6000;
};

// `seed` fixes the class prototypes; `stream` selects an independent set of
// examples drawn from them.
Dataset synthetic_blobs(std::size_t n, std::uint64_t seed, const BlobOptions& options = {}, std::uint64_t stream = 0);

std::vector<double> default_pretrain_angles();  // 0, 10, ..., 90
std::vector<double> default_overlap_angles();   // 20 angles inside (0, 90), offset from the pretrain grid
std::vector<double> default_disjoint_angles();  // 20 angles inside (-90, 0)

struct OracleConfig {
  std::vector<double> pretrain_angles = default_pretrain_angles();
  std::vector<double> overlap_angles = default_overlap_angles();
  std::vector<double> disjoint_angles = default_disjoint_angles();
  int depth = 3;
  int width = 100;
  std::size_t task_size = 1000;
  double pretrain_lr = 0.05;
  int pretrain_epochs = 20;
  std::size_t pretrain_batch = 32;
  double finetune_lr = 0.05;
  int finetune_epochs = 1;
  std::size_t finetune_batch = 10;
  std::uint64_t master_seed = 0;
  DataSource source = DataSource::SyntheticBlobs;
  std::filesystem::path idx_images;
  std::filesystem::path idx_labels;
  BlobOptions blobs;
  Interpolation interpolation = Interpolation::Bilinear;
  std::size_t jobs = 1;

  void validate() const;
};

/// Base images for the configured data source. In blob mode every task draws
/// its own examples, so this is only a sample of the prototypes.
Dataset base_dataset(const OracleConfig& cfg);

// Task streams: 0 pretrain, 1 overlap, 2 disjoint.
RotationTask make_task(const OracleConfig& cfg, const Dataset& base, double angle, int stream, std::size_t index);

/// Pretrained model plus everything needed to measure forgetting on it.
struct Pretrained {
  DenseNet net;
  Eigen::MatrixXd upstream_x;  // pixels x N, tasks in pretrain-angle order
  std::vector<int> upstream_labels;
  std::vector<double> upstream_angles;
  PerformanceSnapshot snapshot;  // per-example cross-entropy of `net`
  double train_accuracy = 0.0;

  std::size_t upstream_size() const { return upstream_labels.size(); }
};

Pretrained pretrain(const OracleConfig& cfg, const Dataset& base);
// Pretrain on explicit tasks (tests use this with hand-built data).
Pretrained pretrain_on(const OracleConfig& cfg, const std::vector<RotationTask>& tasks);

PerformanceSnapshot measure(const Pretrained& pre, const DenseNet& net);

/// Clones the pretrained model, fine-tunes on `task` and returns the loss
/// increase on every upstream example. `pre` is not modified.
Eigen::VectorXd finetune_and_measure(const Pretrained& pre, const RotationTask& task, const OracleConfig& cfg,
                                     std::uint64_t shuffle_seed);

struct ExperimentResult {
  AssociationMatrix overlap;
  AssociationMatrix disjoint;
  double pretrain_accuracy = 0.0;
  std::uint64_t pretrained_fingerprint = 0;
};

ExperimentResult run_experiment(const OracleConfig& cfg);
// Same pipeline on an already pretrained model.
ExperimentResult run_finetunes(const OracleConfig& cfg, const Dataset& base, const Pretrained& pre);

std::string task_id_for(double angle);

/// Fine-tuning run on the oracle driven by the replay orchestrator.
class SynthSession : public FineTuneSession {
 public:
  SynthSession(const Pretrained& pre, RotationTask task, const OracleConfig& cfg, std::vector<std::size_t> held_out,
               std::uint64_t shuffle_seed);

  std::size_t total_steps() const override { return total_steps_; }
  std::size_t upstream_size() const override { return pre_.upstream_size(); }
  const std::vector<std::size_t>& held_out() const override { return held_out_; }

  void reset() override;
  void step(std::size_t s) override;
  void replay(std::span<const std::size_t> upstream) override;

  Eigen::VectorXd forgetting(std::span<const std::size_t> upstream) const override;
  std::unique_ptr<ForgettingProbe> freeze() const override;
  Eigen::VectorXd base_losses() const override { return pre_.snapshot.scores; }
  Eigen::VectorXd gradient_products() const override;

  const DenseNet& model() const { return net_; }
  std::size_t replay_updates() const { return replay_updates_; }

 private:
  const Pretrained& pre_;
  RotationTask task_;
  OracleConfig cfg_;
  std::vector<std::size_t> held_out_;
  std::uint64_t shuffle_seed_;
  std::vector<std::size_t> order_;  // task example per position, all epochs
  std::size_t total_steps_ = 0;
  std::size_t replay_updates_ = 0;
  DenseNet net_;
};

}  // namespace amnesia
