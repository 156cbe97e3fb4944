#pragma once

#include <span>
#include <vector>

#include "sscc/tensor.hpp"

namespace sscc {

/// Added to vector norms so that a zero vector has similarity 0 with anything.
inline constexpr double kNormEpsilon = 1e-12;

struct LossConfig {
  double tau = 0.5;      // temperature of the within-cluster term
  double lambda = 5e-2;  // weight of off-diagonal correlations
  double alpha = 5e-3;   // weight of the within-cluster term
  /// Off only in ablations that train on the within-cluster term alone.
  bool use_between = true;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double within = 0.0;
  double between = 0.0;
};

/// Loss value together with its gradient with respect to both label batches.
struct LossGradient {
  double value = 0.0;
  Matrix grad_a;
  Matrix grad_b;
};

struct TotalLossGradient {
  LossBreakdown value;
  Matrix grad_a;
  Matrix grad_b;
};

double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// NT-Xent over the 2M label rows: each row's positive is the other view of
/// the same sample, and its negatives are the remaining 2M-2 rows. Rows are
/// used as-is (not centered). Needs M >= 2.
double within_cluster_loss(const Matrix& ya, const Matrix& yb, double tau);
LossGradient within_cluster_loss_grad(const Matrix& ya, const Matrix& yb, double tau);

/// Per-anchor terms, ordered a_0..a_{M-1}, b_0..b_{M-1}.
std::vector<double> within_cluster_anchor_losses(const Matrix& ya, const Matrix& yb, double tau);

/// C x C cosine similarities between batch-centered columns of ya and yb.
Matrix cross_correlation(const Matrix& ya, const Matrix& yb);

/// sum_i (C_ii - 1)^2 + lambda * sum_{i != j} C_ij^2
double correlation_loss(const Matrix& corr, double lambda);

double between_cluster_loss(const Matrix& ya, const Matrix& yb, double lambda);
LossGradient between_cluster_loss_grad(const Matrix& ya, const Matrix& yb, double lambda);

/// between + alpha * within (between dropped when use_between is off).
LossBreakdown total_loss(const Matrix& ya, const Matrix& yb, const LossConfig& config);
TotalLossGradient total_loss_grad(const Matrix& ya, const Matrix& yb, const LossConfig& config);

}  // namespace sscc
