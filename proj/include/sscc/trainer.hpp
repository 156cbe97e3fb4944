#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "sscc/augment.hpp"
#include "sscc/hsi.hpp"
#include "sscc/losses.hpp"
#include "sscc/metrics.hpp"
#include "sscc/network.hpp"

namespace sscc {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  int batch_size = 512;
  int epochs = 100;
  double base_lr = 0.02;
  double lr_decay_factor = 0.1;
  int decay_interval_epochs = 20;
  double weight_decay = 5e-3;
  LossConfig loss;
  std::uint64_t seed = 0;
  AdamConfig adam;

  void validate() const;
};

/// base_lr * decay_factor^floor(epoch / decay_interval).
double lr_at_epoch(const TrainConfig& config, int epoch);

/// Adam with weight decay added to the gradient. Parameter tensors can be
/// frozen individually.
class Adam {
 public:
  Adam(const Network& net, AdamConfig config, double weight_decay);

  void step(Network& net, const Gradients& grads, double lr);
  void set_trainable(std::size_t param_index, bool trainable);
  bool trainable(std::size_t param_index) const { return trainable_.at(param_index) != 0; }
  long long steps() const { return t_; }

 private:
  AdamConfig config_;
  double weight_decay_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::vector<char> trainable_;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double loss_w = 0.0;
  double loss_b = 0.0;
  std::optional<EvalReport> eval;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
};

/// Labeled samples scored after every epoch.
struct GroundTruth {
  std::span<const Patch> patches;
  std::span<const std::uint32_t> labels;
  int classes = 0;
};

struct TrainResult {
  Network network;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Views are drawn per sample from make_rng(seed, view, {epoch, batch, slot});
/// the epoch order from make_rng(seed, shuffle, {epoch}). The final partial
/// batch is dropped.
TrainResult train(std::span<const Patch> patches, const AugmentationPool& pool_a, const AugmentationPool& pool_b,
                  const NetworkConfig& net_config, const TrainConfig& config,
                  const GroundTruth* ground_truth = nullptr, const EpochCallback& on_epoch = {});
TrainResult train(std::span<const Patch> patches, const AugmentationPool& pool, const NetworkConfig& net_config,
                  const TrainConfig& config, const GroundTruth* ground_truth = nullptr,
                  const EpochCallback& on_epoch = {});

/// Columns epoch,lr,loss,loss_w,loss_b and, when evaluated,
/// acc,kappa,nmi,ari,purity,divergence.
void write_history_csv(std::ostream& out, const TrainHistory& history);

}  // namespace sscc
