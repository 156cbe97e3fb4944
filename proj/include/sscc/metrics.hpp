#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sscc/tensor.hpp"

namespace sscc {

struct EvalReport {
  double acc = 0.0;
  double kappa = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  double purity = 0.0;
  std::vector<double> per_class_acc;
  /// matching[p] is the ground-truth class assigned to predicted cluster p.
  std::vector<std::uint32_t> matching;
  /// confusion[t][q]: samples of true class t whose mapped prediction is q.
  std::vector<std::vector<std::uint64_t>> confusion;
  std::optional<double> divergence;
};

/// Contingency table: table[p][t] counts samples predicted p with truth t.
std::vector<std::vector<std::uint64_t>> contingency(std::span<const std::uint32_t> pred,
                                                    std::span<const std::uint32_t> truth, int classes);

/// Optimal one-to-one mapping of predicted clusters onto classes, maximizing
/// the number of agreeing samples. Among optimal mappings the
/// lexicographically smallest is returned.
std::vector<std::uint32_t> hungarian_match(std::span<const std::uint32_t> pred,
                                           std::span<const std::uint32_t> truth, int classes);

std::uint64_t matched_count(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> truth,
                            std::span<const std::uint32_t> mapping);

/// ACC, Kappa (on the mapped confusion matrix), NMI (geometric-mean
/// normalization), ARI and Purity.
EvalReport clustering_metrics(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> truth,
                              int classes);

/// Ratio of mean within-class cosine cohesion to class-mean/global-mean
/// cosine similarity, over label representations. Classes are 0..max(truth);
/// every one must be present.
double divergence_score(const Matrix& reps, std::span<const std::uint32_t> truth);

std::string format_report(const EvalReport& report);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& report);
void write_confusion_csv(std::ostream& out, const EvalReport& report);

}  // namespace sscc
