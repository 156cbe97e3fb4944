#include "sscc/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <numeric>
#include <string>

#include "sscc/error.hpp"
#include "sscc/infer.hpp"
#include "sscc/random.hpp"

namespace sscc {

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("base_lr must be positive");
  if (!(lr_decay_factor > 0.0)) throw ConfigError("lr_decay_factor must be positive");
  if (decay_interval_epochs < 1) throw ConfigError("decay_interval_epochs must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.epsilon > 0.0))
    throw ConfigError("invalid Adam constants");
  loss.validate();
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw ConfigError("epoch must be >= 0");
  return config.base_lr * std::pow(config.lr_decay_factor, epoch / config.decay_interval_epochs);
}

Adam::Adam(const Network& net, AdamConfig config, double weight_decay)
    : config_(config), weight_decay_(weight_decay), trainable_(net.params.size(), 1) {
  for (const auto& p : net.params) {
    m_.emplace_back(p.values.size(), 0.0);
    v_.emplace_back(p.values.size(), 0.0);
  }
}

void Adam::set_trainable(std::size_t param_index, bool trainable) { trainable_.at(param_index) = trainable; }

void Adam::step(Network& net, const Gradients& grads, double lr) {
  if (grads.size() != net.params.size()) throw ConfigError("gradient count does not match parameters");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, double(t_));
  for (std::size_t k = 0; k < net.params.size(); ++k) {
    if (!trainable_[k]) continue;
    auto& w = net.params[k].values;
    const auto& g = grads[k];
    if (g.size() != w.size()) throw ConfigError("gradient shape mismatch for " + net.params[k].name);
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] + weight_decay_ * w[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  }
}

namespace {

EvalReport evaluate(const Network& net, const GroundTruth& gt, int batch_size) {
  auto reps = label_representations(net, gt.patches, batch_size);
  auto assignment = assign_from_representations(reps);
  auto report = clustering_metrics(assignment.labels, gt.labels, gt.classes);
  try {
    report.divergence = divergence_score(reps, gt.labels);
  } catch (const Error&) {
    report.divergence.reset();
  }
  return report;
}

}  // namespace

TrainResult train(std::span<const Patch> patches, const AugmentationPool& pool_a, const AugmentationPool& pool_b,
                  const NetworkConfig& net_config, const TrainConfig& config, const GroundTruth* ground_truth,
                  const EpochCallback& on_epoch) {
  config.validate();
  net_config.validate();
  pool_a.validate();
  pool_b.validate();
  if (ground_truth && ground_truth->patches.size() != ground_truth->labels.size())
    throw ConfigError("ground truth patches and labels differ in count");

  TrainResult result{build_network(net_config, config.seed), {}};
  if (config.epochs == 0) return result;
  const auto m = static_cast<std::size_t>(config.batch_size);
  if (patches.size() < m)
    throw ConfigError("need at least batch_size (" + std::to_string(m) + ") patches, got " +
                      std::to_string(patches.size()));

  Network& net = result.network;
  Adam optimizer(net, config.adam, config.weight_decay);
  const std::size_t batches = patches.size() / m;
  std::vector<std::size_t> order(patches.size());
  std::vector<Patch> view_a(m), view_b(m);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = make_rng(config.seed, Stream::shuffle, {std::uint64_t(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_at_epoch(config, epoch);
    for (std::size_t b = 0; b < batches; ++b) {
#pragma omp parallel for schedule(static)
      for (std::size_t j = 0; j < m; ++j) {
        auto rng = make_rng(config.seed, Stream::view, {std::uint64_t(epoch), b, j});
        auto views = two_views(patches[order[b * m + j]], pool_a, pool_b, rng);
        view_a[j] = std::move(views.first);
        view_b[j] = std::move(views.second);
      }
      GradientResult g;
      try {
        g = forward_with_gradients(net, view_a, view_b, config.loss);
      } catch (const DivergenceError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + " batch " +
                              std::to_string(b) + ": " + e.what());
      }
      optimizer.step(net, g.grads, rec.lr);
      if (!net.all_finite())
        throw DivergenceError("non-finite parameters after epoch " + std::to_string(epoch) + " batch " +
                              std::to_string(b));
      rec.loss += g.loss.total;
      rec.loss_w += g.loss.within;
      rec.loss_b += g.loss.between;
    }
    rec.loss /= double(batches);
    rec.loss_w /= double(batches);
    rec.loss_b /= double(batches);
    if (ground_truth) rec.eval = evaluate(net, *ground_truth, config.batch_size);
    result.history.records.push_back(rec);
    if (on_epoch) on_epoch(result.history.records.back());
  }
  return result;
}

TrainResult train(std::span<const Patch> patches, const AugmentationPool& pool, const NetworkConfig& net_config,
                  const TrainConfig& config, const GroundTruth* ground_truth, const EpochCallback& on_epoch) {
  return train(patches, pool, pool, net_config, config, ground_truth, on_epoch);
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  bool with_eval = false;
  for (const auto& r : history.records) with_eval = with_eval || r.eval.has_value();
  out << "epoch,lr,loss,loss_w,loss_b";
  if (with_eval) out << "," << report_csv_header();
  out << "\n";
  char buf[192];
  for (const auto& r : history.records) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g", r.epoch, r.lr, r.loss, r.loss_w, r.loss_b);
    out << buf;
    if (with_eval) out << "," << (r.eval ? report_csv_row(*r.eval) : std::string(",,,,,"));
    out << "\n";
  }
}

}  // namespace sscc
