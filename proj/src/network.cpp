#include "sscc/network.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "sscc/error.hpp"
#include "sscc/random.hpp"

namespace sscc {

namespace {

constexpr std::string_view kCheckpointMagic = "SSCKPT1";
constexpr std::string_view kPipelineTag = "PIPE";

struct BlockLayout {
  kernels::ConvGeometry conv1;
  kernels::ConvGeometry conv2;
  kernels::ConvGeometry proj;
  bool residual = false;
  bool has_proj = false;
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, ws = 0, bs = 0;
};

struct Layout {
  std::vector<BlockLayout> blocks;
  int stack_channels = 0;
  std::size_t latent_w = 0, latent_b = 0, head1_w = 0, head1_b = 0, head2_w = 0, head2_b = 0;
};

Layout make_layout(const NetworkConfig& cfg) {
  Layout layout;
  std::size_t next = 0;
  int channels = cfg.input_channels;
  for (const auto& spec : cfg.conv_blocks) {
    BlockLayout b;
    b.residual = cfg.residual;
    b.conv1 = {channels, spec.out_channels, spec.kernel, spec.stride, spec.kernel / 2};
    b.w1 = next++;
    b.b1 = next++;
    if (cfg.residual) {
      b.conv2 = {spec.out_channels, spec.out_channels, spec.kernel, 1, spec.kernel / 2};
      b.w2 = next++;
      b.b2 = next++;
      b.has_proj = channels != spec.out_channels || spec.stride != 1;
      if (b.has_proj) {
        b.proj = {channels, spec.out_channels, 1, spec.stride, 0};
        b.ws = next++;
        b.bs = next++;
      }
    }
    channels = spec.out_channels;
    layout.blocks.push_back(b);
  }
  layout.stack_channels = channels;
  layout.latent_w = next++;
  layout.latent_b = next++;
  layout.head1_w = next++;
  layout.head1_b = next++;
  layout.head2_w = next++;
  layout.head2_b = next++;
  return layout;
}

std::span<const double> view(const Network& net, std::size_t i) { return net.params[i].values; }

void check_finite(std::span<const double> x, const char* where) {
  for (double v : x)
    if (!std::isfinite(v)) throw DivergenceError(std::string("non-finite activation in ") + where);
}

void add_into(Tensor4& dst, const Tensor4& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

void NetworkConfig::validate() const {
  if (input_channels < 1) throw ConfigError("input_channels must be positive");
  if (input_side < 1 || input_side % 2 == 0) throw ConfigError("input_side must be a positive odd number");
  if (cluster_count < 2) throw ConfigError("cluster_count must be at least 2");
  if (latent_dim < cluster_count) throw ConfigError("latent_dim must be >= cluster_count");
  if (head_hidden < 1) throw ConfigError("head_hidden must be positive");
  for (const auto& b : conv_blocks) {
    if (b.out_channels < 1) throw ConfigError("conv block out_channels must be positive");
    if (b.kernel < 1 || b.kernel % 2 == 0) throw ConfigError("conv kernel size must be a positive odd number");
    if (b.stride < 1) throw ConfigError("conv stride must be positive");
  }
  if (output_side(input_side) < 1) throw ConfigError("conv stack reduces the spatial extent below 1");
}

int NetworkConfig::output_side(int side) const {
  for (const auto& b : conv_blocks) {
    kernels::ConvGeometry g{1, 1, b.kernel, b.stride, b.kernel / 2};
    side = g.out_size(side);
    if (side < 1) return side;
  }
  return side;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.values.size();
  return n;
}

bool Network::all_finite() const {
  for (const auto& p : params)
    for (double v : p.values)
      if (!std::isfinite(v)) return false;
  return true;
}

Network build_network(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Network net;
  net.config = config;
  Rng rng = make_rng(seed, Stream::init);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto add = [&](std::string name, std::vector<int> shape, int fan_in) {
    std::size_t count = 1;
    for (int s : shape) count *= std::size_t(s);
    ParamTensor p{std::move(name), std::move(shape), std::vector<double>(count, 0.0)};
    if (fan_in > 0) {
      const double stddev = std::sqrt(2.0 / fan_in);
      for (double& v : p.values) v = stddev * normal(rng);
    }
    net.params.push_back(std::move(p));
  };

  const Layout layout = make_layout(config);
  for (std::size_t i = 0; i < layout.blocks.size(); ++i) {
    const auto& b = layout.blocks[i];
    const std::string prefix = "conv" + std::to_string(i);
    auto conv = [&](const kernels::ConvGeometry& g, const std::string& suffix) {
      add(prefix + ".w" + suffix, {g.out_channels, g.in_channels, g.kernel, g.kernel},
          g.in_channels * g.kernel * g.kernel);
      add(prefix + ".b" + suffix, {g.out_channels}, 0);
    };
    conv(b.conv1, "1");
    if (b.residual) {
      conv(b.conv2, "2");
      if (b.has_proj) conv(b.proj, "s");
    }
  }
  add("latent.w", {config.latent_dim, layout.stack_channels}, layout.stack_channels);
  add("latent.b", {config.latent_dim}, 0);
  add("head1.w", {config.head_hidden, config.latent_dim}, config.latent_dim);
  add("head1.b", {config.head_hidden}, 0);
  add("head2.w", {config.cluster_count, config.head_hidden}, config.head_hidden);
  add("head2.b", {config.cluster_count}, 0);
  return net;
}

Tensor4 patches_to_tensor(std::span<const Patch> batch) {
  if (batch.empty()) throw ConfigError("empty batch");
  const int side = batch.front().side;
  const int channels = batch.front().channels;
  Tensor4 t(static_cast<int>(batch.size()), channels, side, side);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const Patch& p = batch[n];
    if (p.side != side || p.channels != channels) throw ConfigError("patches in a batch differ in shape");
    double* dst = t.sample(static_cast<int>(n));
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c)
        for (int ch = 0; ch < channels; ++ch) dst[(std::size_t(ch) * side + r) * side + c] = p.at(r, c, ch);
  }
  return t;
}

ForwardTrace forward_trace(const Network& net, const Tensor4& input) {
  const auto& cfg = net.config;
  if (input.n < 1) throw ConfigError("empty batch");
  if (input.c != cfg.input_channels)
    throw ConfigError("input has " + std::to_string(input.c) + " channels, network expects " +
                      std::to_string(cfg.input_channels));
  if (input.h != input.w || input.h % 2 == 0) throw ConfigError("inputs must be square with an odd side");
  if (cfg.output_side(input.h) < 1) throw ConfigError("input side too small for the conv stack");
  check_finite(input.data, "input");

  const Layout layout = make_layout(cfg);
  const auto be = net.backend;
  ForwardTrace tr;
  tr.block_inputs.push_back(input);
  tr.block_mid.resize(layout.blocks.size());

  for (std::size_t i = 0; i < layout.blocks.size(); ++i) {
    const auto& b = layout.blocks[i];
    const Tensor4& x = tr.block_inputs.back();
    Tensor4 h1;
    kernels::conv2d_forward(be, b.conv1, x, view(net, b.w1), view(net, b.b1), h1);
    if (!b.residual) {
      kernels::relu_inplace(h1.data);
      tr.block_inputs.push_back(std::move(h1));
      continue;
    }
    kernels::relu_inplace(h1.data);
    Tensor4 h2;
    kernels::conv2d_forward(be, b.conv2, h1, view(net, b.w2), view(net, b.b2), h2);
    if (b.has_proj) {
      Tensor4 sc;
      kernels::conv2d_forward(be, b.proj, x, view(net, b.ws), view(net, b.bs), sc);
      add_into(h2, sc);
    } else {
      add_into(h2, x);
    }
    kernels::relu_inplace(h2.data);
    tr.block_mid[i] = std::move(h1);
    tr.block_inputs.push_back(std::move(h2));
  }
  check_finite(tr.block_inputs.back().data, "conv stack");

  kernels::global_avg_pool(tr.block_inputs.back(), tr.pooled);
  kernels::linear_forward(be, tr.pooled, view(net, layout.latent_w), view(net, layout.latent_b), cfg.latent_dim,
                          tr.latent);
  kernels::relu_inplace({tr.latent.data(), std::size_t(tr.latent.size())});
  kernels::linear_forward(be, tr.latent, view(net, layout.head1_w), view(net, layout.head1_b), cfg.head_hidden,
                          tr.hidden);
  kernels::relu_inplace({tr.hidden.data(), std::size_t(tr.hidden.size())});
  kernels::linear_forward(be, tr.hidden, view(net, layout.head2_w), view(net, layout.head2_b), cfg.cluster_count,
                          tr.logits);
  check_finite({tr.logits.data(), std::size_t(tr.logits.size())}, "projection head");
  kernels::softmax_rows(tr.logits, tr.labels);
  return tr;
}

ForwardResult forward(const Network& net, std::span<const Patch> batch) {
  auto tr = forward_trace(net, patches_to_tensor(batch));
  return {std::move(tr.latent), std::move(tr.labels)};
}

Gradients backward(const Network& net, const ForwardTrace& tr, const Matrix& grad_labels) {
  const auto& cfg = net.config;
  const Layout layout = make_layout(cfg);
  const auto be = net.backend;
  Gradients grads(net.params.size());
  for (std::size_t i = 0; i < grads.size(); ++i) grads[i].assign(net.params[i].values.size(), 0.0);

  // softmax: dz = y * (g - <g, y>)
  Matrix g_logits(tr.labels.rows(), tr.labels.cols());
  for (Eigen::Index r = 0; r < tr.labels.rows(); ++r) {
    const double dot = grad_labels.row(r).dot(tr.labels.row(r));
    g_logits.row(r) = tr.labels.row(r).cwiseProduct(grad_labels.row(r).array().matrix() -
                                                    Eigen::RowVectorXd::Constant(tr.labels.cols(), dot));
  }

  Matrix g_hidden, g_latent, g_pooled;
  kernels::linear_backward(be, tr.hidden, view(net, layout.head2_w), g_logits, &g_hidden, grads[layout.head2_w],
                           grads[layout.head2_b]);
  kernels::relu_backward_inplace({tr.hidden.data(), std::size_t(tr.hidden.size())},
                                 {g_hidden.data(), std::size_t(g_hidden.size())});
  kernels::linear_backward(be, tr.latent, view(net, layout.head1_w), g_hidden, &g_latent, grads[layout.head1_w],
                           grads[layout.head1_b]);
  kernels::relu_backward_inplace({tr.latent.data(), std::size_t(tr.latent.size())},
                                 {g_latent.data(), std::size_t(g_latent.size())});
  kernels::linear_backward(be, tr.pooled, view(net, layout.latent_w), g_latent, &g_pooled, grads[layout.latent_w],
                           grads[layout.latent_b]);

  Tensor4 g;
  const Tensor4& top = tr.block_inputs.back();
  kernels::global_avg_pool_backward(g_pooled, top.h, top.w, g);

  for (std::size_t i = layout.blocks.size(); i-- > 0;) {
    const auto& b = layout.blocks[i];
    const Tensor4& x = tr.block_inputs[i];
    const Tensor4& out = tr.block_inputs[i + 1];
    kernels::relu_backward_inplace(out.data, g.data);
    const bool need_input_grad = i > 0;
    if (!b.residual) {
      Tensor4 gx;
      kernels::conv2d_backward(be, b.conv1, x, view(net, b.w1), g, need_input_grad ? &gx : nullptr, grads[b.w1],
                               grads[b.b1]);
      g = std::move(gx);
      continue;
    }
    const Tensor4& mid = tr.block_mid[i];
    Tensor4 g_mid;
    kernels::conv2d_backward(be, b.conv2, mid, view(net, b.w2), g, &g_mid, grads[b.w2], grads[b.b2]);
    kernels::relu_backward_inplace(mid.data, g_mid.data);
    Tensor4 gx;
    kernels::conv2d_backward(be, b.conv1, x, view(net, b.w1), g_mid, need_input_grad ? &gx : nullptr, grads[b.w1],
                             grads[b.b1]);
    if (b.has_proj) {
      Tensor4 gs;
      kernels::conv2d_backward(be, b.proj, x, view(net, b.ws), g, need_input_grad ? &gs : nullptr, grads[b.ws],
                               grads[b.bs]);
      if (need_input_grad) add_into(gx, gs);
    } else if (need_input_grad) {
      add_into(gx, g);
    }
    g = std::move(gx);
  }
  return grads;
}

GradientResult forward_with_gradients(const Network& net, std::span<const Patch> batch_a,
                                      std::span<const Patch> batch_b, const LossConfig& loss) {
  if (batch_a.size() != batch_b.size()) throw ConfigError("view batches differ in size");
  if (batch_a.empty()) throw ConfigError("empty batch");
  std::vector<Patch> both;
  both.reserve(batch_a.size() * 2);
  both.insert(both.end(), batch_a.begin(), batch_a.end());
  both.insert(both.end(), batch_b.begin(), batch_b.end());

  const auto m = static_cast<Eigen::Index>(batch_a.size());
  auto tr = forward_trace(net, patches_to_tensor(both));
  GradientResult out;
  out.labels_a = tr.labels.topRows(m);
  out.labels_b = tr.labels.bottomRows(m);
  auto lg = total_loss_grad(out.labels_a, out.labels_b, loss);
  if (!std::isfinite(lg.value.total)) throw DivergenceError("non-finite loss");
  out.loss = lg.value;

  Matrix grad_labels(2 * m, tr.labels.cols());
  grad_labels.topRows(m) = lg.grad_a;
  grad_labels.bottomRows(m) = lg.grad_b;
  out.grads = backward(net, tr, grad_labels);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void write_config(detail::BinaryWriter& out, const NetworkConfig& c) {
  out.u32(static_cast<std::uint32_t>(c.input_side));
  out.u32(static_cast<std::uint32_t>(c.input_channels));
  out.u32(c.residual ? 1u : 0u);
  out.u32(static_cast<std::uint32_t>(c.latent_dim));
  out.u32(static_cast<std::uint32_t>(c.head_hidden));
  out.u32(static_cast<std::uint32_t>(c.cluster_count));
  out.u32(static_cast<std::uint32_t>(c.conv_blocks.size()));
  for (const auto& b : c.conv_blocks) {
    out.u32(static_cast<std::uint32_t>(b.out_channels));
    out.u32(static_cast<std::uint32_t>(b.kernel));
    out.u32(static_cast<std::uint32_t>(b.stride));
  }
}

NetworkConfig read_config(detail::BinaryReader& in) {
  NetworkConfig c;
  c.input_side = static_cast<int>(in.u32());
  c.input_channels = static_cast<int>(in.u32());
  c.residual = in.u32() != 0;
  c.latent_dim = static_cast<int>(in.u32());
  c.head_hidden = static_cast<int>(in.u32());
  c.cluster_count = static_cast<int>(in.u32());
  const auto blocks = in.u32();
  if (blocks > 1024) throw FormatError("implausible conv block count in checkpoint");
  c.conv_blocks.clear();
  for (std::uint32_t i = 0; i < blocks; ++i) {
    ConvBlockSpec b;
    b.out_channels = static_cast<int>(in.u32());
    b.kernel = static_cast<int>(in.u32());
    b.stride = static_cast<int>(in.u32());
    c.conv_blocks.push_back(b);
  }
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const std::optional<PipelineMeta>& pipeline) {
  detail::BinaryWriter out(path);
  out.bytes(kCheckpointMagic);
  write_config(out, net.config);
  out.u32(static_cast<std::uint32_t>(net.params.size()));
  for (const auto& p : net.params) {
    out.u32(static_cast<std::uint32_t>(p.values.size()));
    for (double v : p.values) out.f32(static_cast<float>(v));
  }
  if (pipeline) {
    out.bytes(kPipelineTag);
    out.u32(static_cast<std::uint32_t>(pipeline->patch_side));
    out.u8(pipeline->pca ? 1 : 0);
    if (pipeline->pca) {
      const auto& pca = *pipeline->pca;
      out.u32(static_cast<std::uint32_t>(pca.input_bands()));
      out.u32(static_cast<std::uint32_t>(pca.output_bands()));
      for (Eigen::Index i = 0; i < pca.mean.size(); ++i) out.f64(pca.mean(i));
      for (Eigen::Index r = 0; r < pca.components.rows(); ++r)
        for (Eigen::Index c = 0; c < pca.components.cols(); ++c) out.f64(pca.components(r, c));
      for (Eigen::Index i = 0; i < pca.explained_variance.size(); ++i) out.f64(pca.explained_variance(i));
    }
  }
  out.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig* expected) {
  detail::BinaryReader in(path);
  if (in.remaining() < kCheckpointMagic.size() || in.bytes(kCheckpointMagic.size()) != kCheckpointMagic)
    throw FormatError("bad magic in checkpoint: " + path.string());
  NetworkConfig cfg = read_config(in);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint holds an invalid config: ") + e.what());
  }
  if (expected && !(*expected == cfg))
    throw ConfigError("checkpoint config (" + describe(cfg) + ") does not match expected (" + describe(*expected) +
                      ")");

  Checkpoint ck;
  ck.network = build_network(cfg, 0);
  const auto count = in.u32();
  if (count != ck.network.params.size()) throw FormatError("checkpoint parameter tensor count mismatch");
  for (auto& p : ck.network.params) {
    const auto n = in.u32();
    if (n != p.values.size()) throw FormatError("checkpoint tensor " + p.name + " has the wrong size");
    for (double& v : p.values) v = in.f32();
  }
  if (in.remaining() > 0) {
    if (in.bytes(kPipelineTag.size()) != kPipelineTag) throw FormatError("unknown trailing section in checkpoint");
    PipelineMeta meta;
    meta.patch_side = static_cast<int>(in.u32());
    if (in.u8()) {
      PcaModel pca;
      const auto b = in.u32();
      const auto k = in.u32();
      if (b == 0 || k == 0 || k > b || b > (1u << 20)) throw FormatError("implausible pca dims in checkpoint");
      pca.mean.resize(b);
      pca.components.resize(k, b);
      pca.explained_variance.resize(k);
      for (std::uint32_t i = 0; i < b; ++i) pca.mean(i) = in.f64();
      for (std::uint32_t r = 0; r < k; ++r)
        for (std::uint32_t c = 0; c < b; ++c) pca.components(r, c) = in.f64();
      for (std::uint32_t i = 0; i < k; ++i) pca.explained_variance(i) = in.f64();
      meta.pca = std::move(pca);
    }
    if (in.remaining() > 0) throw FormatError("trailing bytes after checkpoint pipeline section");
    ck.pipeline = std::move(meta);
  }
  if (!ck.network.all_finite()) throw FormatError("checkpoint contains non-finite parameters");
  return ck;
}

std::string describe(const NetworkConfig& c) {
  std::ostringstream os;
  os << "side=" << c.input_side << " channels=" << c.input_channels << " blocks=";
  for (std::size_t i = 0; i < c.conv_blocks.size(); ++i) {
    const auto& b = c.conv_blocks[i];
    os << (i ? "," : "") << b.out_channels << ":" << b.kernel << ":" << b.stride;
  }
  os << " residual=" << (c.residual ? 1 : 0) << " latent=" << c.latent_dim << " hidden=" << c.head_hidden
     << " clusters=" << c.cluster_count;
  return os.str();
}

}  // namespace sscc
