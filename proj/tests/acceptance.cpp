// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sscc/augment.hpp"
#include "sscc/cli.hpp"
#include "sscc/infer.hpp"
#include "sscc/losses.hpp"
#include "sscc/metrics.hpp"
#include "sscc/trainer.hpp"
#include "test_util.hpp"

using namespace sscc;
using Labels = std::vector<std::uint32_t>;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Matrix random_rows(int m, int c, std::mt19937_64& rng, bool softmax) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix y(m, c);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < c; ++j) y(i, j) = softmax ? std::exp(nd(rng)) : nd(rng);
    if (softmax) y.row(i) /= y.row(i).sum();
  }
  return y;
}

std::vector<double> flat(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

std::vector<double> fd_matrix(Matrix x, const std::function<double(const Matrix&)>& f, double h) {
  std::vector<double> g(std::size_t(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double up = f(x);
    x.data()[i] = keep - h;
    const double down = f(x);
    x.data()[i] = keep;
    g[std::size_t(i)] = (up - down) / (2 * h);
  }
  return g;
}

// ---------------------------------------------------------------- criterion 1

void criterion_gradients() {
  const auto t0 = Clock::now();
  const double h = 1e-4;
  double worst = 0.0;
  std::size_t skipped = 0, total = 0;
  std::mt19937_64 rng(2024);
  const int instances = 20;
  for (int trial = 0; trial < instances; ++trial) {
    const int m = trial % 2 ? 8 : 4;
    const int c = (trial / 2) % 2 ? 5 : 3;
    LossConfig lc;
    lc.alpha = 0.3;

    auto ya = random_rows(m, c, rng, true), yb = random_rows(m, c, rng, true);
    auto w = within_cluster_loss_grad(ya, yb, lc.tau);
    auto b = between_cluster_loss_grad(ya, yb, lc.lambda);
    auto t = total_loss_grad(ya, yb, lc);
    auto check = [&](const Matrix& an, const Matrix& x, const std::function<double(const Matrix&)>& f) {
      worst = std::max(worst, testutil::relative_error(flat(an), fd_matrix(x, f, h)));
    };
    check(w.grad_a, ya, [&](const Matrix& x) { return within_cluster_loss(x, yb, lc.tau); });
    check(w.grad_b, yb, [&](const Matrix& x) { return within_cluster_loss(ya, x, lc.tau); });
    check(b.grad_a, ya, [&](const Matrix& x) { return between_cluster_loss(x, yb, lc.lambda); });
    check(b.grad_b, yb, [&](const Matrix& x) { return between_cluster_loss(ya, x, lc.lambda); });
    check(t.grad_a, ya, [&](const Matrix& x) { return total_loss(x, yb, lc).total; });
    check(t.grad_b, yb, [&](const Matrix& x) { return total_loss(ya, x, lc).total; });

    NetworkConfig nc;
    nc.input_side = 5;
    nc.input_channels = 3;
    nc.conv_blocks = {{4, 3, 1}, {6, 3, 2}};
    nc.residual = trial % 3 != 0;
    nc.latent_dim = 6;
    nc.head_hidden = 8;
    nc.cluster_count = c;
    auto net = build_network(nc, 500 + trial);
    std::normal_distribution<double> nd(0.0, 0.1);
    for (auto& p : net.params)
      if (p.name.find(".b") != std::string::npos)
        for (double& v : p.values) v = nd(rng);
    auto pa = testutil::random_patches(m, 5, 3, 1000 + trial);
    auto pb = testutil::random_patches(m, 5, 3, 2000 + trial);
    auto loss_of = [&] { return total_loss(forward(net, pa).labels, forward(net, pb).labels, lc).total; };
    auto g = forward_with_gradients(net, pa, pb, lc);
    const auto base = testutil::relu_pattern(net, pa, pb);
    for (std::size_t k = 0; k < net.params.size(); ++k) {
      auto& values = net.params[k].values;
      std::vector<double> fd, an;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        values[i] = keep + h;
        const double up = loss_of();
        const bool kink = testutil::relu_pattern(net, pa, pb) != base;
        values[i] = keep - h;
        const double down = loss_of();
        const bool kink2 = testutil::relu_pattern(net, pa, pb) != base;
        values[i] = keep;
        ++total;
        if (kink || kink2) {
          ++skipped;
          continue;
        }
        fd.push_back((up - down) / (2 * h));
        an.push_back(g.grads[k][i]);
      }
      worst = std::max(worst, testutil::relative_error(an, fd));
    }
  }
  const double secs = seconds_since(t0);
  const double skip_rate = double(skipped) / double(total);
  report(1, worst < 1e-3 && skip_rate < 0.25 && secs < 60,
         fmt("max rel err %.2e over 20 instances, %.1f%% params skipped at ReLU kinks, %.1fs", worst, 100 * skip_rate,
             secs));
}

// ---------------------------------------------------------------- criterion 2

void criterion_fixed_points() {
  Matrix o(4, 2);
  o << 1, 1, -1, 1, 1, -1, -1, -1;
  const double lb = between_cluster_loss(o, o, 5e-2);
  std::mt19937_64 rng(7);
  double min_anchor = 1e300, asym = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int m = 2 + int(rng() % 15), c = 2 + int(rng() % 6);
    auto a = random_rows(m, c, rng, true), b = random_rows(m, c, rng, true);
    for (double v : within_cluster_anchor_losses(a, b, 0.5)) min_anchor = std::min(min_anchor, v);
    asym = std::max(asym, std::abs(within_cluster_loss(a, b, 0.5) - within_cluster_loss(b, a, 0.5)));
    asym = std::max(asym, std::abs(between_cluster_loss(a, b, 5e-2) - between_cluster_loss(b, a, 5e-2)));
  }
  report(2, std::abs(lb) < 1e-9 && min_anchor >= 0.0 && asym < 1e-9,
         fmt("L_B at C=I %.1e, min anchor loss %.3e, max asymmetry %.1e", lb, min_anchor, asym));
}

// ---------------------------------------------------------------- criterion 3

void criterion_hand_values() {
  Matrix y(2, 2);
  y << 1, 0, 0, 1;
  const double info = within_cluster_loss(y, y, 0.5);
  Matrix c(2, 2);
  c << 1, 0.5, 0.5, 1;
  const double barlow = correlation_loss(c, 1.0);
  Matrix reps(4, 2);
  reps << 1, 0, 1, 0, 0, 1, 0, 1;
  const double s = divergence_score(reps, Labels{0, 0, 1, 1});
  const bool ok = std::abs(info - 0.23944) < 1e-5 && std::abs(barlow - 0.5) < 1e-5 && std::abs(s - std::sqrt(2.0)) < 1e-5;
  const double closed_form = std::log(1.0 + 2.0 * std::exp(-2.0));
  report(3, ok,
         fmt("InfoNCE %.7f (target 0.23944, closed form log(1+2e^-2) = %.7f), ", info, closed_form) +
             fmt("Barlow %.6f, S %.6f", barlow, s));
}

// ---------------------------------------------------------------- criterion 4

std::uint64_t brute_force(const Labels& pred, const Labels& truth, int c) {
  std::vector<std::uint32_t> perm(c);
  std::iota(perm.begin(), perm.end(), 0u);
  std::uint64_t best = 0;
  do {
    std::uint64_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += perm[pred[i]] == truth[i];
    best = std::max(best, hit);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Labels random_labels(std::size_t n, int c, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ud(0, c - 1);
  Labels out(n);
  for (auto& v : out) v = std::uint32_t(ud(rng));
  return out;
}

void criterion_hungarian() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4);
  int agree = 0;
  for (int i = 0; i < 200; ++i) {
    const int c = 1 + i % 6;
    const std::size_t n = 1 + rng() % 100;
    auto pred = random_labels(n, c, rng), truth = random_labels(n, c, rng);
    agree += matched_count(pred, truth, hungarian_match(pred, truth, c)) == brute_force(pred, truth, c);
  }
  const double secs = seconds_since(t0);
  report(4, agree == 200 && secs < 30, fmt("%.0f/200 instances optimal, %.2fs", agree, secs));
}

// ---------------------------------------------------------------- criterion 5

struct Oracle {
  double nmi, ari, kappa, purity;
};

Oracle contingency_oracle(const Labels& pred, const Labels& truth, const std::vector<std::uint32_t>& mapping, int c) {
  const double n = double(pred.size());
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> joint;
  std::map<std::uint32_t, double> rows, cols;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    joint[{pred[i], truth[i]}] += 1;
    rows[pred[i]] += 1;
    cols[truth[i]] += 1;
  }
  double mi = 0, hp = 0, ht = 0;
  for (auto [k, v] : joint) mi += v / n * std::log(v * n / (rows[k.first] * cols[k.second]));
  for (auto [k, v] : rows) hp -= v / n * std::log(v / n);
  for (auto [k, v] : cols) ht -= v / n * std::log(v / n);
  const double nmi = (rows.size() < 2 || cols.size() < 2) ? 0.0 : mi / std::sqrt(hp * ht);

  auto pairs = [](double x) { return x * (x - 1) / 2; };
  double sij = 0, sa = 0, sb = 0;
  for (auto [k, v] : joint) sij += pairs(v);
  for (auto [k, v] : rows) sa += pairs(v);
  for (auto [k, v] : cols) sb += pairs(v);
  const double expected = sa * sb / pairs(n);
  const double denom = 0.5 * (sa + sb) - expected;
  const double ari = denom == 0 ? 1.0 : (sij - expected) / denom;

  std::vector<double> mapped(c, 0), truth_count(c, 0);
  double agree = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    agree += mapping[pred[i]] == truth[i];
    mapped[mapping[pred[i]]] += 1;
    truth_count[truth[i]] += 1;
  }
  double pe = 0;
  for (int k = 0; k < c; ++k) pe += mapped[k] * truth_count[k] / (n * n);
  const double kappa = pe == 1.0 ? 1.0 : (agree / n - pe) / (1 - pe);

  std::map<std::uint32_t, double> best;
  for (auto [k, v] : joint) best[k.first] = std::max(best[k.first], v);
  double purity = 0;
  for (auto [k, v] : best) purity += v;
  return {nmi, ari, kappa, purity / n};
}

void criterion_metric_oracles() {
  std::mt19937_64 rng(5);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const int c = 2 + i % 5;
    auto pred = random_labels(30 + 3 * i, c, rng), truth = random_labels(30 + 3 * i, c, rng);
    auto r = clustering_metrics(pred, truth, c);
    auto o = contingency_oracle(pred, truth, r.matching, c);
    worst = std::max({worst, std::abs(r.nmi - o.nmi), std::abs(r.ari - o.ari), std::abs(r.kappa - o.kappa),
                      std::abs(r.purity - o.purity)});
  }
  Labels perfect{0, 1, 2, 3, 0, 1, 2, 3, 3};
  Labels relabeled{2, 3, 0, 1, 2, 3, 0, 1, 1};
  auto p = clustering_metrics(relabeled, perfect, 4);
  const bool perfect_ok = p.acc == 1.0 && std::abs(p.kappa - 1) < 1e-12 && std::abs(p.nmi - 1) < 1e-12 &&
                          std::abs(p.ari - 1) < 1e-12 && p.purity == 1.0;
  int out_of_range = 0;
  for (int i = 0; i < 1000; ++i) {
    const int c = 2 + i % 7;
    auto pred = random_labels(2 + rng() % 60, c, rng);
    auto truth = random_labels(pred.size(), c, rng);
    auto r = clustering_metrics(pred, truth, c);
    auto unit = [](double v) { return v >= 0 && v <= 1; };
    auto signed_unit = [](double v) { return v >= -1 && v <= 1; };
    out_of_range += !(unit(r.acc) && unit(r.nmi) && unit(r.purity) && signed_unit(r.ari) && signed_unit(r.kappa));
  }
  report(5, worst < 1e-9 && perfect_ok && out_of_range == 0,
         fmt("max oracle gap %.1e, ", worst) + "perfect agreement " + (perfect_ok ? "ok" : "BAD") +
             fmt(", %.0f/1000 out of range", out_of_range));
}

// ---------------------------------------------------------------- criterion 6

Patch sample_patch(int side, int channels, unsigned seed) {
  auto p = testutil::random_patches(1, side, channels, seed)[0];
  return p;
}

void criterion_augmentation() {
  int shape_bad = 0;
  AugmentationPool all;
  for (auto k : kAllTransforms) all.entry(k).probability = 1.0;
  all.spectral_prob = 1.0;
  for (int side : {5, 9, 13})
    for (std::uint64_t s = 0; s < 50; ++s) {
      auto rng = make_rng(s, Stream::view, {std::uint64_t(side)});
      auto p = sample_patch(side, 8, unsigned(s));
      auto out = apply_plan(sample_plan(s % 2 ? all : AugmentationPool{}, rng), p);
      shape_bad += out.side != p.side || out.channels != p.channels || out.values.size() != p.values.size();
    }

  int identity_bad = 0;
  auto p = sample_patch(7, 4, 3);
  for (int h = 0; h < 2; ++h)
    for (int v = 0; v < 2; ++v) {
      Transform t;
      t.kind = TransformKind::flip;
      t.flip_horizontal = h;
      t.flip_vertical = v;
      identity_bad += apply_transform(t, apply_transform(t, p)) != p;
    }
  Transform rot;
  rot.kind = TransformKind::rotate;
  rot.quarter_turns = 1;
  auto turned = p;
  for (int i = 0; i < 4; ++i) turned = apply_transform(rot, turned);
  identity_bad += turned != p;

  int multiset_bad = 0;
  Transform perm;
  perm.kind = TransformKind::permute_band;
  perm.groups = 4;
  for (std::uint64_t s = 0; s < 20; ++s) {
    perm.seed = s;
    auto q = sample_patch(5, 8, unsigned(s));
    auto out = apply_transform(perm, q);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) {
        std::vector<double> a, b;
        for (int c = 0; c < 8; ++c) {
          a.push_back(q.at(y, x, c));
          b.push_back(out.at(y, x, c));
        }
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        multiset_bad += a != b;
      }
  }

  AugmentationPool pool;
  const int n = 10000;
  std::vector<int> hits(kAllTransforms.size(), 0);
  for (int i = 0; i < n; ++i) {
    auto rng = make_rng(99, Stream::plan, {std::uint64_t(i)});
    auto plan = sample_plan(pool, rng);
    for (std::size_t k = 0; k < kAllTransforms.size(); ++k) hits[k] += plan.contains(kAllTransforms[k]);
  }
  double worst = 0;
  for (std::size_t k = 0; k < kAllTransforms.size(); ++k) {
    const auto& e = pool.entry(kAllTransforms[k]);
    const double expected = is_spectral(kAllTransforms[k]) ? pool.spectral_prob * e.probability : e.probability;
    worst = std::max(worst, std::abs(double(hits[k]) / n - expected));
  }
  report(6, shape_bad == 0 && identity_bad == 0 && multiset_bad == 0 && worst <= 0.01,
         fmt("shape/identity/multiset violations %.0f, max frequency gap %.4f", shape_bad + identity_bad + multiset_bad,
             worst));
}

// ------------------------------------------------------------ criteria 7 to 9

struct SceneData {
  PatchSet all;
  PatchSet labeled;
};

SceneData scene_for(std::uint64_t seed) {
  auto s = synth_cube(4, 32, 32, 16, 0.05, seed);
  auto pca = pca_fit(s.cube, 8);
  auto reduced = pca_transform(pca, s.cube);
  return {extract_patches(reduced, nullptr, 9), extract_patches(reduced, &s.labels, 9)};
}

NetworkConfig acceptance_net() {
  NetworkConfig nc;
  nc.input_side = 9;
  nc.input_channels = 8;
  nc.conv_blocks = {{8, 3, 1}, {16, 3, 1}};
  nc.latent_dim = 32;
  nc.head_hidden = 64;
  nc.cluster_count = 4;
  return nc;
}

TrainConfig acceptance_train(std::uint64_t seed) {
  TrainConfig tc;
  tc.batch_size = 64;
  tc.epochs = 30;
  tc.base_lr = 1e-3;
  tc.loss.alpha = 0.5;
  tc.seed = seed;
  return tc;
}

struct RunOutcome {
  double acc = 0;
  double seconds = 0;
  TrainHistory history;
};

RunOutcome run_variant(const SceneData& scene, TrainConfig tc, bool track) {
  const auto t0 = Clock::now();
  GroundTruth gt{scene.labeled.patches, scene.labeled.labels, 4};
  auto r = train(scene.all.patches, AugmentationPool{}, acceptance_net(), tc, track ? &gt : nullptr);
  auto assignment = assign_clusters(r.network, scene.labeled.patches, 256);
  RunOutcome out;
  out.acc = clustering_metrics(assignment.labels, scene.labeled.labels, 4).acc;
  out.seconds = seconds_since(t0);
  out.history = std::move(r.history);
  return out;
}

void criteria_training() {
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<RunOutcome> combined, within, between;
  for (auto seed : seeds) {
    auto scene = scene_for(seed);
    auto tc = acceptance_train(seed);
    combined.push_back(run_variant(scene, tc, true));
    std::printf("  seed %llu combined ACC %.4f (%.1fs)\n", (unsigned long long)seed, combined.back().acc,
                combined.back().seconds);
    auto tw = tc;
    tw.loss.use_between = false;
    tw.loss.alpha = 1.0;
    within.push_back(run_variant(scene, tw, false));
    std::printf("  seed %llu within-only ACC %.4f\n", (unsigned long long)seed, within.back().acc);
    auto tb = tc;
    tb.loss.alpha = 0.0;
    between.push_back(run_variant(scene, tb, false));
    std::printf("  seed %llu between-only ACC %.4f\n", (unsigned long long)seed, between.back().acc);
    std::fflush(stdout);
  }

  int reached = 0;
  double slowest = 0;
  for (const auto& r : combined) {
    reached += r.acc >= 0.90;
    slowest = std::max(slowest, r.seconds);
  }
  report(7, reached >= 2 && slowest < 600,
         fmt("ACC >= 0.90 on %.0f/3 seeds at 30 epochs, slowest run %.1fs", reached, slowest));

  auto mean = [](const std::vector<RunOutcome>& v) {
    double s = 0;
    for (const auto& r : v) s += r.acc;
    return s / double(v.size());
  };
  const double mc = mean(combined), mw = mean(within), mb = mean(between);
  report(8, mc >= mw - 0.05 && mc >= mb - 0.05,
         fmt("mean ACC combined %.4f, within-only %.4f, between-only %.4f", mc, mw, mb));

  int dynamics_ok = 0;
  std::string detail;
  for (const auto& r : combined) {
    const auto& first = r.history.records.front();
    const auto& last = r.history.records.back();
    const double s0 = first.eval->divergence.value_or(0), s1 = last.eval->divergence.value_or(0);
    dynamics_ok += last.loss < first.loss && s1 > s0;
    detail += fmt("loss %.4f->%.4f S %.3f->", first.loss, last.loss, s0) + fmt("%.3f; ", s1);
  }
  report(9, dynamics_ok == int(combined.size()), detail);
}

// --------------------------------------------------------------- criterion 10

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sscc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(int(argv.size()), argv.data(), out, err);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void criterion_determinism() {
  std::vector<std::string> history, assignment;
  bool ok = true;
  for (int run = 0; run < 2; ++run) {
    testutil::TempDir dir;
    const auto d = dir.path.string();
    ok &= cli({"synth", "--size", "16x16", "--bands", "8", "--seed", "5", "--out-dir", d}) == 0;
    ok &= cli({"train", "--cube", d + "/synth_cube.ssc", "--labels", d + "/synth_labels.ssl", "--out-dir", d,
               "--seed", "5", "--epochs", "3", "--batch-size", "32", "--pca", "4", "--patch-size", "7", "--blocks",
               "4:3:1,8:3:1", "--latent-dim", "8", "--head-hidden", "16", "--clusters", "4", "--lr", "0.001",
               "--quiet"}) == 0;
    ok &= cli({"cluster", "--checkpoint", d + "/model.ckpt", "--cube", d + "/synth_cube.ssc", "--out-dir", d}) == 0;
    ok &= cli({"eval", "--assignment", d + "/assignment.csv", "--labels", d + "/synth_labels.ssl", "--out-dir", d}) == 0;
    history.push_back(slurp(dir.path / "history.csv"));
    assignment.push_back(slurp(dir.path / "assignment.csv"));
  }
  const bool same = history[0] == history[1] && assignment[0] == assignment[1] && !history[0].empty() &&
                    !assignment[0].empty();
  report(10, ok && same,
         std::string("history ") + (history[0] == history[1] ? "identical" : "differs") + ", assignment " +
             (assignment[0] == assignment[1] ? "identical" : "differs"));
}

}  // namespace

int main() {
  criterion_gradients();
  criterion_fixed_points();
  criterion_hand_values();
  criterion_hungarian();
  criterion_metric_oracles();
  criterion_augmentation();
  criterion_determinism();
  criteria_training();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
