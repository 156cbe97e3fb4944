#include "sscc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sscc/augment.hpp"
#include "sscc/config.hpp"
#include "sscc/error.hpp"
#include "sscc/hsi.hpp"
#include "sscc/infer.hpp"
#include "sscc/metrics.hpp"
#include "sscc/network.hpp"
#include "sscc/random.hpp"
#include "sscc/trainer.hpp"

namespace fs = std::filesystem;

namespace sscc {

namespace {

constexpr const char* kOutDirEnv = "SSCC_OUT_DIR";

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

/// Output directory: an explicit flag wins, then the environment, then the
/// config value.
fs::path resolve_out_dir(const RunConfig& config, bool flag_given) {
  if (!flag_given) {
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  }
  return config.out_dir.empty() ? fs::path(".") : fs::path(config.out_dir);
}

fs::path output_path(const std::string& explicit_path, const fs::path& out_dir, const char* default_name) {
  return explicit_path.empty() ? out_dir / default_name : fs::path(explicit_path);
}

// ---------------------------------------------------------------------------
// Shared run configuration options

struct ConfigOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string dump_path;
  std::map<std::string, CLI::Option*> flags;
  std::map<std::string, std::string> storage;

  void add_flag(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
    flags[key] = app.add_option(flag, storage[key], help);
  }

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "Key-value config file");
    app.add_option("--set", overrides, "Config override key=value (repeatable)");
    app.add_option("--dump-config", dump_path, "Write the effective config to this file");
    add_flag(app, "--cube", "cube", "Input cube (SSC1)");
    add_flag(app, "--labels", "labels", "Ground-truth label map (SSL1)");
    add_flag(app, "--out-dir", "out_dir", "Output directory");
    add_flag(app, "--seed", "seed", "Base seed");
    add_flag(app, "--epochs", "train.epochs", "Training epochs");
    add_flag(app, "--batch-size", "train.batch_size", "Batch size M");
    add_flag(app, "--lr", "train.base_lr", "Initial learning rate");
    add_flag(app, "--weight-decay", "train.weight_decay", "L2 weight decay");
    add_flag(app, "--clusters", "network.clusters", "Cluster count C");
    add_flag(app, "--blocks", "network.blocks", "Conv blocks out:kernel:stride,...");
    add_flag(app, "--latent-dim", "network.latent_dim", "Latent dimension");
    add_flag(app, "--head-hidden", "network.head_hidden", "Head hidden width");
    add_flag(app, "--patch-size", "patch_side", "Patch side (odd)");
    add_flag(app, "--pca", "pca_components", "PCA components, 0 keeps all bands");
    add_flag(app, "--tau", "loss.tau", "Temperature");
    add_flag(app, "--lambda", "loss.lambda", "Off-diagonal weight of the between-cluster loss");
    add_flag(app, "--alpha", "loss.alpha", "Weight of the within-cluster loss");
  }

  bool given(const std::string& key) const {
    auto it = flags.find(key);
    return it != flags.end() && it->second->count() > 0;
  }

  RunConfig resolve() const {
    RunConfig config;
    if (!config_file.empty()) load_config_file(config_file, config);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, opt] : flags)
      if (opt->count() > 0) config.set(key, storage.at(key));
    if (!given("out_dir"))
      if (const char* env = std::getenv(kOutDirEnv); env && *env) config.out_dir = env;
    config.validate();
    if (!dump_path.empty()) write_text(dump_path, dump_config(config));
    return config;
  }
};

// ---------------------------------------------------------------------------
// Data preparation shared by train and ablate

struct Prepared {
  Cube reduced;
  std::optional<PcaModel> pca;
  std::optional<LabelMap> labels;
};

Prepared prepare(const RunConfig& config) {
  if (config.cube.empty()) throw ConfigError("--cube is required");
  Prepared p;
  Cube cube = load_cube(config.cube);
  if (config.pca_components > 0) {
    if (config.pca_components > int(cube.bands))
      throw ConfigError("pca_components (" + std::to_string(config.pca_components) + ") exceeds band count (" +
                        std::to_string(cube.bands) + ")");
    p.pca = pca_fit(cube, config.pca_components);
    p.reduced = pca_transform(*p.pca, cube);
  } else {
    p.reduced = std::move(cube);
  }
  if (!config.labels.empty()) {
    p.labels = load_labels(config.labels);
    if (p.labels->height != p.reduced.height || p.labels->width != p.reduced.width)
      throw DataError("label map size does not match the cube");
  }
  return p;
}

NetworkConfig network_for(const RunConfig& config, const Cube& reduced, int patch_side) {
  NetworkConfig nc = config.network;
  nc.input_side = patch_side;
  nc.input_channels = int(reduced.bands);
  return nc;
}

int eval_classes(const RunConfig& config, const LabelMap& labels) {
  return std::max<int>(config.network.cluster_count, int(labels.classes));
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(int classes, const std::string& size, int bands, double noise, std::uint64_t seed,
              const std::string& out_cube, const std::string& out_labels, const std::string& out_dir_flag,
              std::ostream& out) {
  int h = 0, w = 0;
  char sep = 0;
  std::istringstream ss(size);
  if (!(ss >> h >> sep >> w) || (sep != 'x' && sep != 'X') || !ss.eof())
    throw ConfigError("--size expects HxW, got '" + size + "'");
  if (classes < 2) throw ConfigError("--classes must be at least 2");
  RunConfig rc;
  if (!out_dir_flag.empty()) rc.out_dir = out_dir_flag;
  const fs::path dir = resolve_out_dir(rc, !out_dir_flag.empty());
  auto scene = synth_cube(classes, h, w, bands, noise, seed);
  const auto cube_path = output_path(out_cube, dir, "synth_cube.ssc");
  const auto label_path = output_path(out_labels, dir, "synth_labels.ssl");
  if (cube_path.has_parent_path()) fs::create_directories(cube_path.parent_path());
  if (label_path.has_parent_path()) fs::create_directories(label_path.parent_path());
  save_cube(scene.cube, cube_path);
  save_labels(scene.labels, label_path);
  out << "wrote " << cube_path.string() << " and " << label_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

void write_divergence_series(const fs::path& path, const TrainHistory& history) {
  double peak = 0.0;
  for (const auto& r : history.records)
    if (r.eval && r.eval->divergence) peak = std::max(peak, *r.eval->divergence);
  auto out = open_output(path);
  out << "epoch,divergence,divergence_scaled\n";
  char buf[128];
  for (const auto& r : history.records) {
    if (!r.eval || !r.eval->divergence) continue;
    const double s = *r.eval->divergence;
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g\n", r.epoch, s, peak > 0 ? s / peak : 0.0);
    out << buf;
  }
}

int cmd_train(const ConfigOptions& opts, const std::string& checkpoint_flag, const std::string& history_flag,
              bool quiet, std::ostream& out) {
  RunConfig config = opts.resolve();
  const fs::path dir = config.out_dir;
  Prepared data = prepare(config);

  auto all = extract_patches(data.reduced, nullptr, config.patch_side);
  std::optional<PatchSet> labeled;
  std::optional<GroundTruth> gt;
  if (data.labels) {
    labeled = extract_patches(data.reduced, &*data.labels, config.patch_side);
    gt = GroundTruth{labeled->patches, labeled->labels, eval_classes(config, *data.labels)};
  }

  const auto nc = network_for(config, data.reduced, config.patch_side);
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  auto progress = [&](const EpochRecord& r) {
    if (quiet) return;
    char buf[256];
    std::snprintf(buf, sizeof buf, "epoch %d lr %.3g loss %.6f loss_w %.6f loss_b %.6f", r.epoch, r.lr, r.loss,
                  r.loss_w, r.loss_b);
    out << buf;
    if (r.eval) {
      std::snprintf(buf, sizeof buf, " acc %.4f nmi %.4f", r.eval->acc, r.eval->nmi);
      out << buf;
      if (r.eval->divergence) {
        std::snprintf(buf, sizeof buf, " S %.4f", *r.eval->divergence);
        out << buf;
      }
    }
    out << "\n" << std::flush;
  };
  auto result = train(all.patches, config.pool, nc, tc, gt ? &*gt : nullptr, progress);

  const auto ckpt = output_path(checkpoint_flag.empty() ? config.checkpoint : checkpoint_flag, dir, "model.ckpt");
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(ckpt, result.network, PipelineMeta{config.patch_side, data.pca});
  const auto hist = output_path(history_flag, dir, "history.csv");
  {
    auto f = open_output(hist);
    write_history_csv(f, result.history);
  }
  if (gt) write_divergence_series(dir / "divergence.csv", result.history);
  out << "wrote " << ckpt.string() << " and " << hist.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// cluster

struct ClusterOptions {
  std::string checkpoint;
  std::string cube;
  std::string out_path;
  std::string out_dir;
  bool dump_reps = false;
  std::string reps_path;
  int batch_size = 256;
};

int cmd_cluster(const ClusterOptions& o, std::ostream& out) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (o.cube.empty()) throw ConfigError("--cube is required");
  if (o.batch_size < 1) throw ConfigError("--batch-size must be positive");
  RunConfig rc;
  if (!o.out_dir.empty()) rc.out_dir = o.out_dir;
  const fs::path dir = resolve_out_dir(rc, !o.out_dir.empty());

  auto ck = load_checkpoint(o.checkpoint);
  PipelineMeta meta = ck.pipeline.value_or(PipelineMeta{ck.network.config.input_side, std::nullopt});
  Cube cube = load_cube(o.cube);
  if (meta.pca) {
    if (int(cube.bands) != meta.pca->input_bands())
      throw DataError("cube has " + std::to_string(cube.bands) + " bands but the checkpoint expects " +
                      std::to_string(meta.pca->input_bands()));
    cube = pca_transform(*meta.pca, cube);
  }
  if (int(cube.bands) != ck.network.config.input_channels)
    throw DataError("cube has " + std::to_string(cube.bands) + " channels after preprocessing but the network expects " +
                    std::to_string(ck.network.config.input_channels));
  auto patches = extract_patches(cube, nullptr, meta.patch_side);
  auto reps = label_representations(ck.network, patches.patches, o.batch_size);
  auto assignment = assign_from_representations(reps);

  const auto path = output_path(o.out_path, dir, "assignment.csv");
  {
    auto f = open_output(path);
    write_assignment_csv(f, patches.patches, assignment);
  }
  out << "wrote " << path.string() << "\n";
  if (o.dump_reps || !o.reps_path.empty()) {
    const auto rp = output_path(o.reps_path, dir, "representations.csv");
    auto f = open_output(rp);
    write_representations_csv(f, patches.patches, reps);
    out << "wrote " << rp.string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

/// Predicted labels for every labeled pixel, in row-major order.
std::vector<std::uint32_t> predictions_for(const std::vector<AssignmentRow>& rows, const LabelMap& labels) {
  const std::size_t pixels = std::size_t(labels.height) * labels.width;
  const std::size_t labeled = labels.labeled_count();
  if (rows.size() != pixels && rows.size() != labeled)
    throw DataError("assignment has " + std::to_string(rows.size()) + " rows; expected " + std::to_string(pixels) +
                    " (all pixels) or " + std::to_string(labeled) + " (labeled pixels)");
  std::vector<std::int64_t> grid(pixels, -1);
  for (const auto& r : rows) {
    if (r.row >= labels.height || r.col >= labels.width)
      throw DataError("assignment row/col (" + std::to_string(r.row) + "," + std::to_string(r.col) +
                      ") outside the label map");
    grid[std::size_t(r.row) * labels.width + r.col] = r.label;
  }
  std::vector<std::uint32_t> pred;
  pred.reserve(labeled);
  for (std::uint32_t y = 0; y < labels.height; ++y)
    for (std::uint32_t x = 0; x < labels.width; ++x) {
      if (labels.at(y, x) == kUnlabeled) continue;
      const auto v = grid[std::size_t(y) * labels.width + x];
      if (v < 0)
        throw DataError("no assignment for labeled pixel (" + std::to_string(y) + "," + std::to_string(x) + ")");
      pred.push_back(static_cast<std::uint32_t>(v));
    }
  return pred;
}

Matrix read_representations(const fs::path& path, const LabelMap& labels) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("row,col,y_0", 0) != 0)
    throw FormatError(path.string() + ": missing row,col,y_0 header");
  const auto dims = std::count(line.begin(), line.end(), ',') - 1;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<double>> by_pixel;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) values.push_back(std::strtod(cell.c_str(), nullptr));
    if (std::ptrdiff_t(values.size()) != dims + 2) throw FormatError(path.string() + ": ragged row");
    by_pixel[{std::uint32_t(values[0]), std::uint32_t(values[1])}] =
        std::vector<double>(values.begin() + 2, values.end());
  }
  Matrix reps(static_cast<Eigen::Index>(labels.labeled_count()), dims);
  Eigen::Index i = 0;
  for (std::uint32_t y = 0; y < labels.height; ++y)
    for (std::uint32_t x = 0; x < labels.width; ++x) {
      if (labels.at(y, x) == kUnlabeled) continue;
      auto it = by_pixel.find({y, x});
      if (it == by_pixel.end()) throw DataError("representations lack labeled pixel " + std::to_string(y) + "," + std::to_string(x));
      for (Eigen::Index c = 0; c < dims; ++c) reps(i, c) = it->second[c];
      ++i;
    }
  return reps;
}

int cmd_eval(const std::string& assignment_path, const std::string& labels_path, const std::string& reps_path,
             const std::string& out_dir_flag, std::ostream& out) {
  if (assignment_path.empty()) throw ConfigError("--assignment is required");
  if (labels_path.empty()) throw ConfigError("--labels is required");
  RunConfig rc;
  if (!out_dir_flag.empty()) rc.out_dir = out_dir_flag;
  const fs::path dir = resolve_out_dir(rc, !out_dir_flag.empty());

  auto labels = load_labels(labels_path);
  auto rows = read_assignment_csv(assignment_path);
  auto pred = predictions_for(rows, labels);
  std::vector<std::uint32_t> truth;
  truth.reserve(pred.size());
  for (auto l : labels.labels)
    if (l != kUnlabeled) truth.push_back(l);
  if (truth.empty()) throw DataError("label map has no labeled pixels");
  const int classes = int(labels.classes);
  for (auto p : pred)
    if (p >= std::uint32_t(classes))
      throw DataError("predicted label " + std::to_string(p) + " outside the label map's " + std::to_string(classes) +
                      " classes");

  auto report = clustering_metrics(pred, truth, classes);
  if (!reps_path.empty()) report.divergence = divergence_score(read_representations(reps_path, labels), truth);

  fs::create_directories(dir);
  write_text(dir / "report.txt", format_report(report));
  write_text(dir / "report.csv", report_csv_header() + "\n" + report_csv_row(report) + "\n");
  {
    auto f = open_output(dir / "confusion.csv");
    write_confusion_csv(f, report);
  }
  out << format_report(report);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOptions {
  std::vector<double> taus, lambdas, alphas;
  std::vector<int> batch_sizes, patch_sizes;
  std::vector<std::string> losses;
  std::vector<std::string> aug_pairs;
  std::vector<std::uint64_t> seeds;
  std::string out_path;
  bool quiet = false;
};

struct AugChoice {
  std::string name_a, name_b;
  AugmentationPool a, b;
};

std::vector<AugChoice> augmentation_grid(const RunConfig& config, const std::vector<std::string>& names) {
  if (names.empty()) return {AugChoice{"pool", "pool", config.pool, config.pool}};
  std::vector<TransformKind> kinds;
  for (const auto& n : names) {
    auto k = parse_transform(n);
    if (!k) throw ConfigError("unknown transform '" + n + "'");
    if (std::find(kinds.begin(), kinds.end(), *k) != kinds.end()) throw ConfigError("duplicate transform '" + n + "'");
    kinds.push_back(*k);
  }
  auto single = [&](TransformKind k) {
    AugmentationPool p = AugmentationPool::only(k);
    p.crop_scale_lo = config.pool.crop_scale_lo;
    p.crop_scale_hi = config.pool.crop_scale_hi;
    p.rotation_quarters = config.pool.rotation_quarters;
    p.blur_sigma_lo = config.pool.blur_sigma_lo;
    p.blur_sigma_hi = config.pool.blur_sigma_hi;
    p.pixel_erase_fraction = config.pool.pixel_erase_fraction;
    p.band_erase_fraction = config.pool.band_erase_fraction;
    p.band_group_count = config.pool.band_group_count;
    return p;
  };
  std::vector<AugChoice> out;
  for (std::size_t i = 0; i < kinds.size(); ++i)
    for (std::size_t j = i; j < kinds.size(); ++j) {
      AugChoice c;
      c.name_a = std::string(transform_name(kinds[i]));
      c.name_b = std::string(transform_name(kinds[j]));
      c.a = single(kinds[i]);
      c.b = single(kinds[j]);
      out.push_back(std::move(c));
    }
  return out;
}

LossConfig loss_variant(LossConfig base, const std::string& name) {
  if (name == "combined") return base;
  if (name == "within") {
    base.use_between = false;
    base.alpha = 1.0;
    return base;
  }
  if (name == "between") {
    base.use_between = true;
    base.alpha = 0.0;
    return base;
  }
  throw ConfigError("unknown loss variant '" + name + "' (expected combined, within or between)");
}

int cmd_ablate(const ConfigOptions& opts, AblateOptions a, std::ostream& out) {
  RunConfig config = opts.resolve();
  if (config.labels.empty()) throw ConfigError("ablate needs --labels to score each configuration");
  Prepared data = prepare(config);

  if (a.taus.empty()) a.taus = {config.train.loss.tau};
  if (a.lambdas.empty()) a.lambdas = {config.train.loss.lambda};
  if (a.alphas.empty()) a.alphas = {config.train.loss.alpha};
  if (a.batch_sizes.empty()) a.batch_sizes = {config.train.batch_size};
  if (a.patch_sizes.empty()) a.patch_sizes = {config.patch_side};
  if (a.losses.empty()) a.losses = {"combined"};
  if (a.seeds.empty()) a.seeds = {config.seed};
  for (const auto& l : a.losses) loss_variant(config.train.loss, l);
  const auto augs = augmentation_grid(config, a.aug_pairs);
  const int classes = eval_classes(config, *data.labels);

  const auto path = output_path(a.out_path, config.out_dir, "ablation.csv");
  std::ostringstream csv;
  csv << "loss,tau,lambda,alpha,batch_size,patch_side,aug_a,aug_b,seed," << report_csv_header() << "\n";
  for (int side : a.patch_sizes) {
    if (side < 1 || side % 2 == 0) throw ConfigError("patch sizes must be positive odd numbers");
    auto all = extract_patches(data.reduced, nullptr, side);
    auto labeled = extract_patches(data.reduced, &*data.labels, side);
    GroundTruth gt{labeled.patches, labeled.labels, classes};
    const auto nc = network_for(config, data.reduced, side);
    for (const auto& loss_name : a.losses)
      for (double tau : a.taus)
        for (double lambda : a.lambdas)
          for (double alpha : a.alphas)
            for (int batch : a.batch_sizes)
              for (const auto& aug : augs)
                for (auto seed : a.seeds) {
                  TrainConfig tc = config.train;
                  tc.batch_size = batch;
                  tc.seed = seed;
                  tc.loss.tau = tau;
                  tc.loss.lambda = lambda;
                  tc.loss.alpha = alpha;
                  tc.loss = loss_variant(tc.loss, loss_name);
                  auto result = train(all.patches, aug.a, aug.b, nc, tc);
                  auto reps = label_representations(result.network, gt.patches, std::max(batch, 1));
                  auto assignment = assign_from_representations(reps);
                  auto report = clustering_metrics(assignment.labels, gt.labels, classes);
                  try {
                    report.divergence = divergence_score(reps, gt.labels);
                  } catch (const Error&) {
                  }
                  char buf[256];
                  std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%.9g,%d,%d,%s,%s,%llu,", loss_name.c_str(),
                                tc.loss.tau, tc.loss.lambda, tc.loss.alpha, batch, side, aug.name_a.c_str(),
                                aug.name_b.c_str(), static_cast<unsigned long long>(seed));
                  csv << buf << report_csv_row(report) << "\n";
                  if (!a.quiet) out << buf << report_csv_row(report) << "\n" << std::flush;
                }
  }
  write_text(path, csv.str());
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// augment-preview

struct PreviewOptions {
  std::string cube;
  int row = 0;
  int col = 0;
  int patch_size = 13;
  int pca = 0;
  int views = 4;
  std::uint64_t seed = 0;
  std::vector<std::string> transforms;
  std::string out_path;
  std::string out_dir;
};

int cmd_preview(const PreviewOptions& o, std::ostream& out) {
  if (o.cube.empty()) throw ConfigError("--cube is required");
  if (o.views < 1) throw ConfigError("--views must be positive");
  if (o.patch_size < 1 || o.patch_size % 2 == 0) throw ConfigError("--patch-size must be a positive odd number");
  RunConfig rc;
  if (!o.out_dir.empty()) rc.out_dir = o.out_dir;
  const fs::path dir = resolve_out_dir(rc, !o.out_dir.empty());

  Cube cube = load_cube(o.cube);
  if (o.pca > 0) cube = pca_transform(pca_fit(cube, o.pca), cube);
  if (o.row < 0 || o.col < 0 || o.row >= int(cube.height) || o.col >= int(cube.width))
    throw ConfigError("--row/--col outside the cube");

  AugmentationPool pool;
  if (!o.transforms.empty()) {
    pool = AugmentationPool::identity();
    for (const auto& n : o.transforms) {
      auto k = parse_transform(n);
      if (!k) throw ConfigError("unknown transform '" + n + "'");
      pool.entry(*k).probability = 1.0;
      if (is_spectral(*k)) pool.spectral_prob = 1.0;
    }
  }
  pool.validate();

  const Patch source = extract_patch(cube, o.row, o.col, o.patch_size);
  const int side = source.side;
  Cube sheet;
  sheet.height = std::uint32_t(side * (o.views + 1));
  sheet.width = std::uint32_t(side);
  sheet.bands = std::uint32_t(source.channels);
  sheet.values.assign(std::size_t(sheet.height) * sheet.width * sheet.bands, 0.0f);
  auto blit = [&](const Patch& p, int slot) {
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        for (int c = 0; c < p.channels; ++c)
          sheet.values[(std::size_t(slot * side + y) * sheet.width + x) * sheet.bands + c] =
              static_cast<float>(p.at(y, x, c));
  };
  blit(source, 0);
  out << "view 0: original\n";
  for (int v = 0; v < o.views; ++v) {
    auto rng = make_rng(o.seed, Stream::view, {0, 0, std::uint64_t(v)});
    auto plan = sample_plan(pool, rng);
    blit(apply_plan(plan, source), v + 1);
    out << "view " << v + 1 << ":";
    if (plan.empty()) out << " identity";
    for (const auto& t : plan.steps) out << " " << transform_name(t.kind);
    out << "\n";
  }
  const auto path = output_path(o.out_path, dir, "preview.ssc");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_cube(sheet, path);
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised spectral clustering of hyperspectral images", "sscc"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled cube");
  int classes = 4, bands = 16;
  std::string size = "32x32", synth_cube_out, synth_labels_out, synth_out_dir;
  double noise = 0.05;
  std::uint64_t synth_seed = 0;
  synth->add_option("--classes", classes, "Number of classes")->capture_default_str();
  synth->add_option("--size", size, "Height x width, e.g. 32x32")->capture_default_str();
  synth->add_option("--bands", bands, "Spectral bands")->capture_default_str();
  synth->add_option("--noise", noise, "Gaussian noise sigma")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Seed")->capture_default_str();
  synth->add_option("--out-cube", synth_cube_out, "Cube path");
  synth->add_option("--out-labels", synth_labels_out, "Label map path");
  synth->add_option("--out-dir", synth_out_dir, "Output directory");

  auto* train_cmd = app.add_subcommand("train", "Train the twin network");
  ConfigOptions train_opts;
  train_opts.attach(*train_cmd);
  std::string checkpoint_out, history_out;
  bool quiet = false;
  train_cmd->add_option("--checkpoint", checkpoint_out, "Checkpoint path");
  train_cmd->add_option("--history", history_out, "History CSV path");
  train_cmd->add_flag("--quiet", quiet, "No per-epoch output");

  auto* cluster_cmd = app.add_subcommand("cluster", "Assign clusters with a trained network");
  ClusterOptions cluster_opts;
  cluster_cmd->add_option("--checkpoint", cluster_opts.checkpoint, "Checkpoint");
  cluster_cmd->add_option("--cube", cluster_opts.cube, "Cube to cluster");
  cluster_cmd->add_option("--out", cluster_opts.out_path, "Assignment CSV path");
  cluster_cmd->add_option("--out-dir", cluster_opts.out_dir, "Output directory");
  cluster_cmd->add_flag("--dump-reps", cluster_opts.dump_reps, "Also write label representations");
  cluster_cmd->add_option("--reps-out", cluster_opts.reps_path, "Label representation CSV path");
  cluster_cmd->add_option("--batch-size", cluster_opts.batch_size, "Inference batch size")->capture_default_str();

  auto* eval_cmd = app.add_subcommand("eval", "Score an assignment against ground truth");
  std::string assignment_in, labels_in, reps_in, eval_out_dir;
  eval_cmd->add_option("--assignment", assignment_in, "Assignment CSV");
  eval_cmd->add_option("--labels", labels_in, "Label map (SSL1)");
  eval_cmd->add_option("--reps", reps_in, "Label representation CSV for the divergence score");
  eval_cmd->add_option("--out-dir", eval_out_dir, "Output directory");

  auto* ablate_cmd = app.add_subcommand("ablate", "Sweep loss, hyperparameter and augmentation grids");
  ConfigOptions ablate_opts;
  ablate_opts.attach(*ablate_cmd);
  AblateOptions ablate;
  ablate_cmd->add_option("--taus", ablate.taus, "Temperatures")->delimiter(',');
  ablate_cmd->add_option("--lambdas", ablate.lambdas, "Lambda values")->delimiter(',');
  ablate_cmd->add_option("--alphas", ablate.alphas, "Alpha values")->delimiter(',');
  ablate_cmd->add_option("--batch-sizes", ablate.batch_sizes, "Batch sizes")->delimiter(',');
  ablate_cmd->add_option("--patch-sizes", ablate.patch_sizes, "Patch sides")->delimiter(',');
  ablate_cmd->add_option("--losses", ablate.losses, "Loss variants: combined, within, between")->delimiter(',');
  ablate_cmd->add_option("--aug-pairs", ablate.aug_pairs, "Transforms to pair up")->delimiter(',');
  ablate_cmd->add_option("--seeds", ablate.seeds, "Seeds")->delimiter(',');
  ablate_cmd->add_option("--out", ablate.out_path, "Sweep CSV path");
  ablate_cmd->add_flag("--quiet", ablate.quiet, "No per-row output");

  auto* preview_cmd = app.add_subcommand("augment-preview", "Write augmented views of one patch");
  PreviewOptions preview;
  preview_cmd->add_option("--cube", preview.cube, "Input cube");
  preview_cmd->add_option("--row", preview.row, "Center row")->capture_default_str();
  preview_cmd->add_option("--col", preview.col, "Center column")->capture_default_str();
  preview_cmd->add_option("--patch-size", preview.patch_size, "Patch side")->capture_default_str();
  preview_cmd->add_option("--pca", preview.pca, "PCA components, 0 keeps all bands")->capture_default_str();
  preview_cmd->add_option("--views", preview.views, "Number of views")->capture_default_str();
  preview_cmd->add_option("--seed", preview.seed, "Seed")->capture_default_str();
  preview_cmd->add_option("--transforms", preview.transforms, "Restrict to these transforms")->delimiter(',');
  preview_cmd->add_option("--out", preview.out_path, "Output cube path");
  preview_cmd->add_option("--out-dir", preview.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth)
      return cmd_synth(classes, size, bands, noise, synth_seed, synth_cube_out, synth_labels_out, synth_out_dir, out);
    if (*train_cmd) return cmd_train(train_opts, checkpoint_out, history_out, quiet, out);
    if (*cluster_cmd) return cmd_cluster(cluster_opts, out);
    if (*eval_cmd) return cmd_eval(assignment_in, labels_in, reps_in, eval_out_dir, out);
    if (*ablate_cmd) return cmd_ablate(ablate_opts, ablate, out);
    if (*preview_cmd) return cmd_preview(preview, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace sscc
