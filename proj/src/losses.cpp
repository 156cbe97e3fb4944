#include "sscc/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sscc/error.hpp"

namespace sscc {

void LossConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be >= 0");
}

namespace {

void check_pair(const Matrix& ya, const Matrix& yb) {
  if (ya.rows() != yb.rows() || ya.cols() != yb.cols())
    throw ConfigError("label batches differ in shape");
  if (ya.rows() < 2) throw ConfigError("contrastive losses need a batch of at least 2 samples");
  if (ya.cols() < 1) throw ConfigError("label batches have no columns");
}

struct Normalized {
  Matrix unit;        // rows (or columns) scaled by 1 / (norm + eps)
  Eigen::VectorXd norm;
};

Normalized normalize_rows(const Matrix& x) {
  Normalized out{x, x.rowwise().norm()};
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.unit.row(r) /= out.norm(r) + kNormEpsilon;
  return out;
}

Normalized normalize_cols(const Matrix& x) {
  Normalized out{x, x.colwise().norm().transpose()};
  for (Eigen::Index c = 0; c < x.cols(); ++c) out.unit.col(c) /= out.norm(c) + kNormEpsilon;
  return out;
}

/// Backward through v -> v / (|v| + eps) for one vector.
template <typename In, typename Grad>
Eigen::VectorXd normalize_backward(const In& v, double norm, const Grad& grad_unit) {
  const double d = norm + kNormEpsilon;
  Eigen::VectorXd g = grad_unit / d;
  if (norm > 0.0) g -= v * (v.dot(grad_unit) / (norm * d * d));
  return g;
}

Matrix center_cols(const Matrix& y) { return y.rowwise() - y.colwise().mean(); }

struct WithinPass {
  double value = 0.0;
  std::vector<double> anchors;
  Matrix grad_sim;  // dL/dS over the 2M x 2M similarity matrix
};

WithinPass within_pass(const Matrix& stacked_unit, Eigen::Index m, double tau, bool want_grad) {
  const Eigen::Index n2 = 2 * m;
  Matrix sim = stacked_unit * stacked_unit.transpose();
  WithinPass out;
  out.anchors.resize(n2);
  if (want_grad) out.grad_sim = Matrix::Zero(n2, n2);
  std::vector<double> logits(n2);
  for (Eigen::Index k = 0; k < n2; ++k) {
    const Eigen::Index pos = k < m ? k + m : k - m;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n2; ++j) {
      if (j == k) continue;
      logits[j] = sim(k, j) / tau;
      mx = std::max(mx, logits[j]);
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < n2; ++j)
      if (j != k) total += std::exp(logits[j] - mx);
    const double lse = mx + std::log(total);
    out.anchors[k] = lse - logits[pos];
    out.value += out.anchors[k];
    if (want_grad) {
      const double scale = 1.0 / (double(n2) * tau);
      for (Eigen::Index j = 0; j < n2; ++j) {
        if (j == k) continue;
        const double p = std::exp(logits[j] - lse);
        out.grad_sim(k, j) = scale * (p - (j == pos ? 1.0 : 0.0));
      }
    }
  }
  out.value /= double(n2);
  return out;
}

Matrix stack(const Matrix& ya, const Matrix& yb) {
  Matrix r(ya.rows() * 2, ya.cols());
  r.topRows(ya.rows()) = ya;
  r.bottomRows(yb.rows()) = yb;
  return r;
}

}  // namespace

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ConfigError("cosine similarity of vectors with different lengths");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return dot / ((std::sqrt(nu) + kNormEpsilon) * (std::sqrt(nv) + kNormEpsilon));
}

double within_cluster_loss(const Matrix& ya, const Matrix& yb, double tau) {
  check_pair(ya, yb);
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  return within_pass(normalize_rows(stack(ya, yb)).unit, ya.rows(), tau, false).value;
}

std::vector<double> within_cluster_anchor_losses(const Matrix& ya, const Matrix& yb, double tau) {
  check_pair(ya, yb);
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  return within_pass(normalize_rows(stack(ya, yb)).unit, ya.rows(), tau, false).anchors;
}

LossGradient within_cluster_loss_grad(const Matrix& ya, const Matrix& yb, double tau) {
  check_pair(ya, yb);
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  const Eigen::Index m = ya.rows();
  Matrix rows = stack(ya, yb);
  auto norm = normalize_rows(rows);
  auto pass = within_pass(norm.unit, m, tau, true);

  Matrix grad_unit = (pass.grad_sim + pass.grad_sim.transpose()) * norm.unit;
  Matrix grad_rows(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r)
    grad_rows.row(r) =
        normalize_backward(rows.row(r).transpose(), norm.norm(r), grad_unit.row(r).transpose()).transpose();

  return {pass.value, grad_rows.topRows(m), grad_rows.bottomRows(m)};
}

Matrix cross_correlation(const Matrix& ya, const Matrix& yb) {
  check_pair(ya, yb);
  return normalize_cols(center_cols(ya)).unit.transpose() * normalize_cols(center_cols(yb)).unit;
}

double correlation_loss(const Matrix& corr, double lambda) {
  double on = 0.0, off = 0.0;
  for (Eigen::Index i = 0; i < corr.rows(); ++i)
    for (Eigen::Index j = 0; j < corr.cols(); ++j) {
      if (i == j)
        on += (corr(i, j) - 1.0) * (corr(i, j) - 1.0);
      else
        off += corr(i, j) * corr(i, j);
    }
  return on + lambda * off;
}

double between_cluster_loss(const Matrix& ya, const Matrix& yb, double lambda) {
  return correlation_loss(cross_correlation(ya, yb), lambda);
}

LossGradient between_cluster_loss_grad(const Matrix& ya, const Matrix& yb, double lambda) {
  check_pair(ya, yb);
  Matrix ca = center_cols(ya);
  Matrix cb = center_cols(yb);
  auto na = normalize_cols(ca);
  auto nb = normalize_cols(cb);
  Matrix corr = na.unit.transpose() * nb.unit;

  Matrix g = 2.0 * lambda * corr;
  for (Eigen::Index i = 0; i < corr.rows(); ++i) g(i, i) = 2.0 * (corr(i, i) - 1.0);

  Matrix grad_unit_a = nb.unit * g.transpose();
  Matrix grad_unit_b = na.unit * g;

  auto back = [](const Matrix& centered, const Normalized& n, const Matrix& grad_unit) {
    Matrix grad(centered.rows(), centered.cols());
    for (Eigen::Index c = 0; c < centered.cols(); ++c)
      grad.col(c) = normalize_backward(centered.col(c), n.norm(c), grad_unit.col(c));
    // Centering is a projection, so its adjoint removes the column mean.
    return Matrix(grad.rowwise() - grad.colwise().mean());
  };

  return {correlation_loss(corr, lambda), back(ca, na, grad_unit_a), back(cb, nb, grad_unit_b)};
}

LossBreakdown total_loss(const Matrix& ya, const Matrix& yb, const LossConfig& config) {
  config.validate();
  LossBreakdown out;
  out.within = within_cluster_loss(ya, yb, config.tau);
  out.between = between_cluster_loss(ya, yb, config.lambda);
  out.total = (config.use_between ? out.between : 0.0) + config.alpha * out.within;
  return out;
}

TotalLossGradient total_loss_grad(const Matrix& ya, const Matrix& yb, const LossConfig& config) {
  config.validate();
  auto w = within_cluster_loss_grad(ya, yb, config.tau);
  auto b = between_cluster_loss_grad(ya, yb, config.lambda);
  TotalLossGradient out;
  out.value.within = w.value;
  out.value.between = b.value;
  const double wb = config.use_between ? 1.0 : 0.0;
  out.value.total = wb * b.value + config.alpha * w.value;
  out.grad_a = wb * b.grad_a + config.alpha * w.grad_a;
  out.grad_b = wb * b.grad_b + config.alpha * w.grad_b;
  return out;
}

}  // namespace sscc
