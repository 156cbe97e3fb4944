#include "sscc/infer.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "sscc/error.hpp"

namespace sscc {

LabelBatch label_representations(const Network& net, std::span<const Patch> patches, int batch_size) {
  if (patches.empty()) throw ConfigError("no patches to cluster");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  const auto n = patches.size();
  LabelBatch out(static_cast<Eigen::Index>(n), net.config.cluster_count);
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(batch_size), n - start);
    auto result = forward(net, patches.subspan(start, len));
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) = result.labels;
  }
  return out;
}

ClusterAssignment assign_from_representations(const LabelBatch& reps) {
  ClusterAssignment a;
  a.labels.resize(static_cast<std::size_t>(reps.rows()));
  a.confidences.resize(static_cast<std::size_t>(reps.rows()));
  for (Eigen::Index r = 0; r < reps.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < reps.cols(); ++c)
      if (reps(r, c) > reps(r, best)) best = c;
    a.labels[r] = static_cast<std::uint32_t>(best);
    a.confidences[r] = reps(r, best);
  }
  return a;
}

ClusterAssignment assign_clusters(const Network& net, std::span<const Patch> patches, int batch_size) {
  return assign_from_representations(label_representations(net, patches, batch_size));
}

void write_assignment_csv(std::ostream& out, std::span<const Patch> patches, const ClusterAssignment& a) {
  if (patches.size() != a.labels.size()) throw ConfigError("assignment and patch counts differ");
  out << "row,col,label,confidence\n";
  char buf[96];
  for (std::size_t i = 0; i < patches.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%d,%u,%.9g\n", patches[i].center_row, patches[i].center_col,
                  a.labels[i], a.confidences[i]);
    out << buf;
  }
}

void write_representations_csv(std::ostream& out, std::span<const Patch> patches, const LabelBatch& reps) {
  if (patches.size() != static_cast<std::size_t>(reps.rows()))
    throw ConfigError("representation and patch counts differ");
  out << "row,col";
  for (Eigen::Index c = 0; c < reps.cols(); ++c) out << ",y_" << c;
  out << "\n";
  char buf[32];
  for (std::size_t i = 0; i < patches.size(); ++i) {
    out << patches[i].center_row << "," << patches[i].center_col;
    for (Eigen::Index c = 0; c < reps.cols(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.9g", reps(static_cast<Eigen::Index>(i), c));
      out << buf;
    }
    out << "\n";
  }
}

std::vector<AssignmentRow> read_assignment_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("row,col,label", 0) != 0)
    throw FormatError(path.string() + ": missing row,col,label header");
  std::vector<AssignmentRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    AssignmentRow r;
    long long row = -1, col = -1, label = -1;
    double conf = 0.0;
    const int got = std::sscanf(line.c_str(), "%lld,%lld,%lld,%lf", &row, &col, &label, &conf);
    if (got < 3 || row < 0 || col < 0 || label < 0)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed assignment row");
    r.row = static_cast<std::uint32_t>(row);
    r.col = static_cast<std::uint32_t>(col);
    r.label = static_cast<std::uint32_t>(label);
    r.confidence = got == 4 ? conf : 0.0;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace sscc
