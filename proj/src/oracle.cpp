#include "amnesia/oracle.hpp"

#include "amnesia/matrix_io.hpp"
#include "amnesia/parallel.hpp"
#include "amnesia/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace amnesia {

const char* to_string(DataSource s) { return s == DataSource::Idx ? "idx" : "blobs"; }

DataSource parse_data_source(const std::string& text) {
  if (text == "idx") return DataSource::Idx;
  if (text == "blobs" || text == "synthetic-blobs") return DataSource::SyntheticBlobs;
  throw std::invalid_argument("unknown data source '" + text + "'");
}

Dataset synthetic_blobs(std::size_t n, std::uint64_t seed, const BlobOptions& o, std::uint64_t stream) {
  if (o.side < 4 || o.blobs_per_class < 1 || !(o.sigma_min > 0.0) || o.sigma_max < o.sigma_min ||
      o.radius_max < o.radius_min)
    throw std::invalid_argument("invalid blob options");
  struct Blob {
    double x, y, sigma, amp;
  };
  Rng proto_rng(derive_seed(seed, 0xb10b));
  std::vector<std::vector<Blob>> protos(10);
  const double center = (o.side - 1) / 2.0;
  for (auto& blobs : protos) {
    for (int b = 0; b < o.blobs_per_class; ++b) {
      const double radius = o.radius_min + (o.radius_max - o.radius_min) * proto_rng.uniform();
      const double theta = 2.0 * std::numbers::pi * proto_rng.uniform();
      blobs.push_back({center + radius * std::cos(theta), center - radius * std::sin(theta),
                       o.sigma_min + (o.sigma_max - o.sigma_min) * proto_rng.uniform(),
                       0.7 + 0.3 * proto_rng.uniform()});
    }
  }

  // Rotation-invariant part: one ring per class at its own radius.
  // Classes share radii when ring_groups < 10, so rings alone cannot separate them.
  std::vector<double> ring_radius(10);
  const int groups = std::clamp(o.ring_groups, 1, 10);
  for (int c = 0; c < 10; ++c)
    ring_radius[static_cast<std::size_t>(c)] =
        groups == 1 ? o.ring_min : o.ring_min + (o.ring_max - o.ring_min) * (c % groups) / (groups - 1.0);
  proto_rng.shuffle(std::span(ring_radius));

  Rng rng(derive_seed(seed, 0xda7a, stream));
  Dataset d;
  d.height = d.width = o.side;
  d.images.resize(o.side * o.side, static_cast<Eigen::Index>(n));
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 10);
    d.labels[i] = label;
    std::vector<Blob> blobs = protos[static_cast<std::size_t>(label)];
    // Ambiguous examples borrow dimmed blobs from another class.
    const double mix = o.max_mix * std::pow(rng.uniform(), o.mix_power);
    const auto other = static_cast<std::size_t>((label + 1 + static_cast<int>(rng.below(9))) % 10);
    for (auto& b : blobs) b.amp *= 1.0 - mix;
    for (auto b : protos[other]) {
      b.amp *= mix;
      blobs.push_back(b);
    }
    const double ring_amp = o.ring_amplitude * (1.0 + o.amplitude_jitter * rng.normal());
    for (auto& b : blobs) {
      b.x += o.position_jitter * rng.normal();
      b.y += o.position_jitter * rng.normal();
      b.amp *= 1.0 + o.amplitude_jitter * rng.normal();
    }
    for (int r = 0; r < o.side; ++r) {
      for (int c = 0; c < o.side; ++c) {
        double v = 0.0;
        if (o.ring_amplitude > 0.0) {
          const double rr = std::hypot(c - center, r - center) - ring_radius[static_cast<std::size_t>(label)];
          v += ring_amp * std::exp(-rr * rr / (2.0 * o.ring_width * o.ring_width));
        }
        for (const auto& b : blobs) {
          const double dx = c - b.x, dy = r - b.y;
          v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
        }
        v += o.noise * rng.normal();
        d.images(r * o.side + c, static_cast<Eigen::Index>(i)) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return d;
}

std::vector<double> default_pretrain_angles() {
  std::vector<double> a;
  for (int k = 0; k < 10; ++k) a.push_back(10.0 * k);
  return a;
}

std::vector<double> default_overlap_angles() {
  std::vector<double> a;
  for (int k = 0; k < 20; ++k) a.push_back(2.25 + 4.5 * k);
  return a;
}

std::vector<double> default_disjoint_angles() {
  std::vector<double> a;
  for (int k = 19; k >= 0; --k) a.push_back(-(2.25 + 4.5 * k));
  return a;
}

void OracleConfig::validate() const {
  if (pretrain_angles.empty()) throw std::invalid_argument("pretrain angle list is empty");
  if (overlap_angles.empty() && disjoint_angles.empty()) throw std::invalid_argument("fine-tune angle lists are empty");
  for (const auto* list : {&pretrain_angles, &overlap_angles, &disjoint_angles})
    for (double a : *list)
      if (!(std::abs(a) <= 180.0)) throw std::invalid_argument("rotation angles must lie in [-180, 180]");
  if (depth < 1 || depth > 5) throw std::invalid_argument("network depth must be 1-5");
  if (width < 1) throw std::invalid_argument("hidden width must be >= 1");
  if (task_size < 1) throw std::invalid_argument("task size must be >= 1");
  if (!(pretrain_lr > 0.0) || !(finetune_lr > 0.0)) throw std::invalid_argument("learning rates must be > 0");
  if (pretrain_epochs < 0 || finetune_epochs < 0) throw std::invalid_argument("epoch counts must be >= 0");
  if (pretrain_batch < 1 || finetune_batch < 1) throw std::invalid_argument("batch sizes must be >= 1");
  if (source == DataSource::Idx && (idx_images.empty() || idx_labels.empty()))
    throw std::invalid_argument("idx data source needs image and label paths");
}

Dataset base_dataset(const OracleConfig& cfg) {
  if (cfg.source == DataSource::Idx) return load_idx(cfg.idx_images, cfg.idx_labels);
  return synthetic_blobs(cfg.blobs.base_size, derive_seed(cfg.master_seed, 0xba5e), cfg.blobs);
}

RotationTask make_task(const OracleConfig& cfg, const Dataset& base, double angle, int stream, std::size_t index) {
  const std::uint64_t seed = derive_seed(cfg.master_seed, 100 + static_cast<std::uint64_t>(stream), index);
  if (cfg.source == DataSource::SyntheticBlobs) {
    // Fresh draws from the shared class prototypes.
    const Dataset fresh = synthetic_blobs(cfg.task_size, derive_seed(cfg.master_seed, 0xba5e), cfg.blobs, seed);
    return make_rotated(fresh, angle, cfg.task_size, seed, cfg.interpolation);
  }
  return make_rotated(base, angle, cfg.task_size, seed, cfg.interpolation);
}

std::string task_id_for(double angle) { return "rot" + format_double(angle); }

namespace {

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& x, std::span<const std::size_t> cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(cols[k]));
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(labels[i]);
  return out;
}

// Losses over many columns, evaluated in blocks to bound memory.
Eigen::VectorXd blocked_losses(const DenseNet& net, const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  constexpr Eigen::Index kBlock = 2048;
  Eigen::VectorXd out(x.cols());
  for (Eigen::Index start = 0; start < x.cols(); start += kBlock) {
    const Eigen::Index len = std::min(kBlock, x.cols() - start);
    out.segment(start, len) = net.losses(x.middleCols(start, len), std::span(labels).subspan(start, len));
  }
  return out;
}

class FrozenProbe : public ForgettingProbe {
 public:
  FrozenProbe(const Pretrained& pre, DenseNet net) : pre_(pre), net_(std::move(net)) {}
  Eigen::VectorXd measure(std::span<const std::size_t> upstream) const override {
    const Eigen::VectorXd after = net_.losses(gather_columns(pre_.upstream_x, upstream),
                                              gather_labels(pre_.upstream_labels, upstream));
    Eigen::VectorXd out(after.size());
    for (std::size_t k = 0; k < upstream.size(); ++k)
      out[static_cast<Eigen::Index>(k)] = after[static_cast<Eigen::Index>(k)] -
                                          pre_.snapshot.scores[static_cast<Eigen::Index>(upstream[k])];
    return out;
  }

 private:
  const Pretrained& pre_;
  DenseNet net_;
};

}  // namespace

PerformanceSnapshot measure(const Pretrained& pre, const DenseNet& net) {
  PerformanceSnapshot s;
  s.example_ids = pre.snapshot.example_ids;
  s.kind = ValueKind::Continuous;
  s.scores = blocked_losses(net, pre.upstream_x, pre.upstream_labels);
  return s;
}

Pretrained pretrain_on(const OracleConfig& cfg, const std::vector<RotationTask>& tasks) {
  if (tasks.empty()) throw std::invalid_argument("no pretraining tasks");
  Pretrained pre;
  std::size_t total = 0;
  for (const auto& t : tasks) total += t.data.size();
  const Eigen::Index pixels = tasks.front().data.images.rows();
  pre.upstream_x.resize(pixels, static_cast<Eigen::Index>(total));
  Eigen::Index col = 0;
  for (const auto& t : tasks) {
    if (t.data.images.rows() != pixels) throw std::invalid_argument("pretraining tasks differ in image size");
    pre.upstream_x.middleCols(col, t.data.images.cols()) = t.data.images;
    col += t.data.images.cols();
    for (std::size_t k = 0; k < t.data.size(); ++k) {
      pre.upstream_labels.push_back(t.data.labels[k]);
      pre.upstream_angles.push_back(t.angle);
      pre.snapshot.example_ids.push_back("r" + format_double(t.angle) + "_" + std::to_string(k));
    }
  }

  Rng init_rng(derive_seed(cfg.master_seed, 0x1417));
  pre.net = DenseNet(static_cast<int>(pixels), cfg.width, cfg.depth, 10, init_rng);
  Rng order_rng(derive_seed(cfg.master_seed, 0x0bde));
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < total; start += cfg.pretrain_batch) {
      const auto batch = std::span(order).subspan(start, std::min(cfg.pretrain_batch, total - start));
      const double loss = pre.net.sgd_step(gather_columns(pre.upstream_x, batch),
                                           gather_labels(pre.upstream_labels, batch), cfg.pretrain_lr);
      if (!std::isfinite(loss)) throw std::runtime_error("pretraining diverged in epoch " + std::to_string(epoch + 1));
    }
  }
  pre.snapshot.kind = ValueKind::Continuous;
  pre.snapshot.scores = blocked_losses(pre.net, pre.upstream_x, pre.upstream_labels);
  pre.train_accuracy = pre.net.accuracy(pre.upstream_x, pre.upstream_labels);
  return pre;
}

Pretrained pretrain(const OracleConfig& cfg, const Dataset& base) {
  cfg.validate();
  std::vector<double> angles = cfg.pretrain_angles;
  std::sort(angles.begin(), angles.end());
  std::vector<RotationTask> tasks;
  for (std::size_t i = 0; i < angles.size(); ++i) tasks.push_back(make_task(cfg, base, angles[i], 0, i));
  return pretrain_on(cfg, tasks);
}

SynthSession::SynthSession(const Pretrained& pre, RotationTask task, const OracleConfig& cfg,
                           std::vector<std::size_t> held_out, std::uint64_t shuffle_seed)
    : pre_(pre), task_(std::move(task)), cfg_(cfg), held_out_(std::move(held_out)), shuffle_seed_(shuffle_seed) {
  const std::size_t n = task_.data.size();
  Rng rng(shuffle_seed_);
  std::vector<std::size_t> epoch_order(n);
  for (int e = 0; e < cfg_.finetune_epochs; ++e) {
    std::iota(epoch_order.begin(), epoch_order.end(), std::size_t{0});
    rng.shuffle(std::span(epoch_order));
    order_.insert(order_.end(), epoch_order.begin(), epoch_order.end());
  }
  const std::size_t per_epoch = (n + cfg_.finetune_batch - 1) / cfg_.finetune_batch;
  total_steps_ = per_epoch * static_cast<std::size_t>(cfg_.finetune_epochs);
  net_ = pre_.net;
}

void SynthSession::reset() {
  net_ = pre_.net;
  replay_updates_ = 0;
}

void SynthSession::step(std::size_t s) {
  if (s < 1 || s > total_steps_) throw std::out_of_range("fine-tune step out of range");
  const std::size_t n = task_.data.size();
  const std::size_t per_epoch = (n + cfg_.finetune_batch - 1) / cfg_.finetune_batch;
  const std::size_t epoch = (s - 1) / per_epoch;
  const std::size_t start = ((s - 1) % per_epoch) * cfg_.finetune_batch;
  const auto batch = std::span(order_).subspan(epoch * n + start, std::min(cfg_.finetune_batch, n - start));
  const double loss =
      net_.sgd_step(gather_columns(task_.data.images, batch), gather_labels(task_.data.labels, batch), cfg_.finetune_lr);
  if (!std::isfinite(loss)) throw std::runtime_error("fine-tuning diverged at step " + std::to_string(s));
}

void SynthSession::replay(std::span<const std::size_t> upstream) {
  if (upstream.empty()) return;
  net_.sgd_step(gather_columns(pre_.upstream_x, upstream), gather_labels(pre_.upstream_labels, upstream),
                cfg_.finetune_lr);
  ++replay_updates_;
}

Eigen::VectorXd SynthSession::forgetting(std::span<const std::size_t> upstream) const {
  return FrozenProbe(pre_, net_).measure(upstream);
}

std::unique_ptr<ForgettingProbe> SynthSession::freeze() const { return std::make_unique<FrozenProbe>(pre_, net_); }

Eigen::VectorXd SynthSession::gradient_products() const {
  const Eigen::VectorXd task_grad = pre_.net.gradient(task_.data.images, task_.data.labels);
  Eigen::VectorXd out(static_cast<Eigen::Index>(pre_.upstream_size()));
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    const Eigen::VectorXd g = per_example_gradient(pre_.net, pre_.upstream_x.col(j), pre_.upstream_labels[j]);
    out[j] = stats::grad_grad_product(g, task_grad);
  }
  return out;
}

Eigen::VectorXd finetune_and_measure(const Pretrained& pre, const RotationTask& task, const OracleConfig& cfg,
                                     std::uint64_t shuffle_seed) {
  SynthSession session(pre, task, cfg, {}, shuffle_seed);
  session.reset();
  for (std::size_t s = 1; s <= session.total_steps(); ++s) session.step(s);
  return build_row(pre.snapshot, measure(pre, session.model()));
}

ExperimentResult run_finetunes(const OracleConfig& cfg, const Dataset& base, const Pretrained& pre) {
  auto regime = [&](std::vector<double> angles, int stream) {
    std::sort(angles.begin(), angles.end());
    Eigen::MatrixXd z(static_cast<Eigen::Index>(angles.size()), static_cast<Eigen::Index>(pre.upstream_size()));
    std::vector<std::string> ids;
    for (double a : angles) ids.push_back(task_id_for(a));
    parallel_for(angles.size(), cfg.jobs, [&](std::size_t i) {
      const RotationTask task = make_task(cfg, base, angles[i], stream, i);
      z.row(static_cast<Eigen::Index>(i)) =
          finetune_and_measure(pre, task, cfg, derive_seed(cfg.master_seed, 200 + static_cast<std::uint64_t>(stream), i))
              .transpose();
    });
    return AssociationMatrix(std::move(z), ValueKind::Continuous, std::move(ids), pre.snapshot.example_ids);
  };
  ExperimentResult r{regime(cfg.overlap_angles, 1), regime(cfg.disjoint_angles, 2), pre.train_accuracy,
                     pre.net.fingerprint()};
  return r;
}

ExperimentResult run_experiment(const OracleConfig& cfg) {
  cfg.validate();
  const Dataset base = base_dataset(cfg);
  const Pretrained pre = pretrain(cfg, base);
  return run_finetunes(cfg, base, pre);
}

}  // namespace amnesia
