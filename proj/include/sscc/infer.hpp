#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <vector>

#include "sscc/hsi.hpp"
#include "sscc/network.hpp"

namespace sscc {

struct ClusterAssignment {
  std::vector<std::uint32_t> labels;
  std::vector<double> confidences;
};

/// Softmax label rows for every patch, computed batch by batch.
LabelBatch label_representations(const Network& net, std::span<const Patch> patches, int batch_size);

/// Row-wise argmax; ties go to the lowest cluster index.
ClusterAssignment assign_from_representations(const LabelBatch& reps);

ClusterAssignment assign_clusters(const Network& net, std::span<const Patch> patches, int batch_size);

/// Columns row,col,label,confidence.
void write_assignment_csv(std::ostream& out, std::span<const Patch> patches, const ClusterAssignment& a);
/// Columns row,col,y_0..y_{C-1}.
void write_representations_csv(std::ostream& out, std::span<const Patch> patches, const LabelBatch& reps);

struct AssignmentRow {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::uint32_t label = 0;
  double confidence = 0.0;
};

std::vector<AssignmentRow> read_assignment_csv(const std::filesystem::path& path);

}  // namespace sscc
