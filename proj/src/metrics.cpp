#include "sscc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "sscc/error.hpp"
#include "sscc/losses.hpp"

namespace sscc {

namespace {

void check_labels(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> truth, int classes) {
  if (classes < 1) throw ConfigError("class count must be positive");
  if (pred.size() != truth.size())
    throw ConfigError("prediction and ground truth lengths differ (" + std::to_string(pred.size()) + " vs " +
                      std::to_string(truth.size()) + ")");
  if (pred.empty()) throw ConfigError("no samples to evaluate");
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] >= std::uint32_t(classes) || truth[i] >= std::uint32_t(classes))
      throw ConfigError("label out of range at sample " + std::to_string(i));
}

/// Minimum-cost perfect assignment on a square matrix (potentials method).
/// Returns the optimal cost; assignment[row] = col.
long long min_cost_assignment(const std::vector<std::vector<long long>>& cost, std::vector<int>& assignment) {
  const int n = static_cast<int>(cost.size());
  constexpr long long inf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<long long> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      long long delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const long long cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  assignment.assign(n, -1);
  long long total = 0;
  for (int j = 1; j <= n; ++j) {
    assignment[p[j] - 1] = j - 1;
    total += cost[p[j] - 1][j - 1];
  }
  return total;
}

/// Best total weight matching rows `rows` to columns `cols` (equal sizes).
long long best_weight(const std::vector<std::vector<std::uint64_t>>& w, const std::vector<int>& rows,
                      const std::vector<int>& cols) {
  if (rows.empty()) return 0;
  const std::size_t n = rows.size();
  std::vector<std::vector<long long>> cost(n, std::vector<long long>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i][j] = -static_cast<long long>(w[rows[i]][cols[j]]);
  std::vector<int> assignment;
  return -min_cost_assignment(cost, assignment);
}

double comb2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

std::vector<std::vector<std::uint64_t>> contingency(std::span<const std::uint32_t> pred,
                                                    std::span<const std::uint32_t> truth, int classes) {
  check_labels(pred, truth, classes);
  std::vector<std::vector<std::uint64_t>> table(classes, std::vector<std::uint64_t>(classes, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++table[pred[i]][truth[i]];
  return table;
}

std::vector<std::uint32_t> hungarian_match(std::span<const std::uint32_t> pred,
                                           std::span<const std::uint32_t> truth, int classes) {
  const auto table = contingency(pred, truth, classes);
  std::vector<int> all(classes);
  std::iota(all.begin(), all.end(), 0);
  const long long optimum = best_weight(table, all, all);

  // Fix predicted clusters in order, each to the smallest class that still
  // admits an optimal completion.
  std::vector<std::uint32_t> mapping(classes, 0);
  std::vector<int> free_cols = all;
  long long fixed = 0;
  for (int row = 0; row < classes; ++row) {
    std::vector<int> rest_rows;
    for (int r = row + 1; r < classes; ++r) rest_rows.push_back(r);
    bool placed = false;
    for (std::size_t k = 0; k < free_cols.size() && !placed; ++k) {
      const int col = free_cols[k];
      std::vector<int> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(k));
      const long long gain = static_cast<long long>(table[row][col]);
      if (fixed + gain + best_weight(table, rest_rows, rest_cols) == optimum) {
        mapping[row] = static_cast<std::uint32_t>(col);
        fixed += gain;
        free_cols = std::move(rest_cols);
        placed = true;
      }
    }
    if (!placed) throw Error("internal error: no optimal completion found in label matching");
  }
  return mapping;
}

std::uint64_t matched_count(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> truth,
                            std::span<const std::uint32_t> mapping) {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (mapping[pred[i]] == truth[i]) ++n;
  return n;
}

EvalReport clustering_metrics(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> truth,
                              int classes) {
  EvalReport rep;
  const auto table = contingency(pred, truth, classes);
  rep.matching = hungarian_match(pred, truth, classes);
  const double n = static_cast<double>(pred.size());

  rep.confusion.assign(classes, std::vector<std::uint64_t>(classes, 0));
  for (int p = 0; p < classes; ++p)
    for (int t = 0; t < classes; ++t) rep.confusion[t][rep.matching[p]] += table[p][t];

  std::vector<double> truth_count(classes, 0.0), mapped_count(classes, 0.0);
  double diag = 0.0;
  for (int t = 0; t < classes; ++t)
    for (int q = 0; q < classes; ++q) {
      const double c = double(rep.confusion[t][q]);
      truth_count[t] += c;
      mapped_count[q] += c;
      if (t == q) diag += c;
    }
  rep.acc = diag / n;
  rep.per_class_acc.resize(classes);
  for (int t = 0; t < classes; ++t)
    rep.per_class_acc[t] = truth_count[t] > 0 ? double(rep.confusion[t][t]) / truth_count[t] : 0.0;

  double expected = 0.0;
  for (int t = 0; t < classes; ++t) expected += truth_count[t] * mapped_count[t];
  expected /= n * n;
  rep.kappa = expected >= 1.0 ? (rep.acc >= 1.0 ? 1.0 : 0.0) : (rep.acc - expected) / (1.0 - expected);

  // Entropies and mutual information from the raw contingency table.
  std::vector<double> pred_count(classes, 0.0), true_count(classes, 0.0);
  for (int p = 0; p < classes; ++p)
    for (int t = 0; t < classes; ++t) {
      pred_count[p] += double(table[p][t]);
      true_count[t] += double(table[p][t]);
    }
  auto entropy = [n](const std::vector<double>& counts) {
    double h = 0.0;
    for (double c : counts)
      if (c > 0) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double hp = entropy(pred_count);
  const double ht = entropy(true_count);
  double mi = 0.0;
  for (int p = 0; p < classes; ++p)
    for (int t = 0; t < classes; ++t) {
      const double c = double(table[p][t]);
      if (c > 0) mi += (c / n) * std::log(c * n / (pred_count[p] * true_count[t]));
    }
  rep.nmi = (hp > 0.0 && ht > 0.0) ? std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0) : 0.0;

  double index = 0.0, sum_p = 0.0, sum_t = 0.0;
  for (int p = 0; p < classes; ++p)
    for (int t = 0; t < classes; ++t) index += comb2(double(table[p][t]));
  for (double c : pred_count) sum_p += comb2(c);
  for (double c : true_count) sum_t += comb2(c);
  const double total_pairs = comb2(n);
  const double expected_index = total_pairs > 0 ? sum_p * sum_t / total_pairs : 0.0;
  const double max_index = 0.5 * (sum_p + sum_t);
  const double denom = max_index - expected_index;
  rep.ari = denom == 0.0 ? 1.0 : (index - expected_index) / denom;

  double purity = 0.0;
  for (int p = 0; p < classes; ++p) purity += double(*std::max_element(table[p].begin(), table[p].end()));
  rep.purity = purity / n;
  return rep;
}

double divergence_score(const Matrix& reps, std::span<const std::uint32_t> truth) {
  if (static_cast<std::size_t>(reps.rows()) != truth.size())
    throw ConfigError("representation rows and labels differ in count");
  if (truth.empty()) throw ConfigError("no samples for divergence");
  const auto classes = static_cast<std::size_t>(*std::max_element(truth.begin(), truth.end())) + 1;
  const auto dim = reps.cols();

  Matrix class_mean = Matrix::Zero(static_cast<Eigen::Index>(classes), dim);
  std::vector<std::size_t> count(classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    class_mean.row(truth[i]) += reps.row(static_cast<Eigen::Index>(i));
    ++count[truth[i]];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] == 0) throw ConfigError("class " + std::to_string(c) + " has no samples");
    class_mean.row(static_cast<Eigen::Index>(c)) /= double(count[c]);
  }
  Eigen::RowVectorXd global = reps.colwise().mean();

  auto row_span = [](const auto& m, Eigen::Index r) {
    return std::span<const double>(m.data() + r * m.cols(), static_cast<std::size_t>(m.cols()));
  };
  std::vector<double> cohesion(classes, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i)
    cohesion[truth[i]] +=
        cosine_similarity(row_span(reps, static_cast<Eigen::Index>(i)), row_span(class_mean, truth[i]));
  double numerator = 0.0, denominator = 0.0;
  const std::span<const double> g(global.data(), static_cast<std::size_t>(dim));
  for (std::size_t c = 0; c < classes; ++c) {
    numerator += cohesion[c] / double(count[c]);
    denominator += cosine_similarity(row_span(class_mean, static_cast<Eigen::Index>(c)), g);
  }
  if (std::abs(denominator) < 1e-12) throw Error("degenerate geometry: divergence denominator is zero");
  return numerator / denominator;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  char buf[128];
  auto line = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "%-10s %.6f\n", name, v);
    os << buf;
  };
  line("ACC", r.acc);
  line("Kappa", r.kappa);
  line("NMI", r.nmi);
  line("ARI", r.ari);
  line("Purity", r.purity);
  if (r.divergence) line("S", *r.divergence);
  os << "per-class accuracy:\n";
  for (std::size_t c = 0; c < r.per_class_acc.size(); ++c) {
    std::snprintf(buf, sizeof buf, "  class %-4zu %.6f\n", c, r.per_class_acc[c]);
    os << buf;
  }
  os << "matching (cluster -> class):";
  for (std::size_t p = 0; p < r.matching.size(); ++p) os << " " << p << "->" << r.matching[p];
  os << "\n";
  return os.str();
}

std::string report_csv_header() { return "acc,kappa,nmi,ari,purity,divergence"; }

std::string report_csv_row(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,", r.acc, r.kappa, r.nmi, r.ari, r.purity);
  std::string s = buf;
  if (r.divergence) {
    std::snprintf(buf, sizeof buf, "%.9g", *r.divergence);
    s += buf;
  }
  return s;
}

void write_confusion_csv(std::ostream& out, const EvalReport& r) {
  out << "class";
  for (std::size_t q = 0; q < r.confusion.size(); ++q) out << ",pred_" << q;
  out << "\n";
  for (std::size_t t = 0; t < r.confusion.size(); ++t) {
    out << t;
    for (auto c : r.confusion[t]) out << "," << c;
    out << "\n";
  }
}

}  // namespace sscc
