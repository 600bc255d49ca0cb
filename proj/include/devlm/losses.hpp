#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "devlm/tensor.hpp"

namespace devlm {

enum class Label : std::uint8_t { kNegative = 0, kPositive = 1, kIgnore = 2 };

/// Supervision over the (modifier slot, class) grid of a linguistic graph.
/// Cells without a graph node stay kIgnore.
class TriStateLabelMatrix {
 public:
  TriStateLabelMatrix() = default;
  TriStateLabelMatrix(std::size_t slots, std::size_t classes, Label fill = Label::kIgnore)
      : slots_(slots), classes_(classes), cells_(slots * classes, fill) {}

  std::size_t slots() const { return slots_; }
  std::size_t classes() const { return classes_; }
  std::size_t cell_count() const { return cells_.size(); }

  Label& at(std::size_t slot, std::size_t cls) { return cells_[slot * classes_ + cls]; }
  Label at(std::size_t slot, std::size_t cls) const { return cells_[slot * classes_ + cls]; }
  Label cell(std::size_t flat) const { return cells_[flat]; }

  std::size_t count(Label l) const;

  friend bool operator==(const TriStateLabelMatrix&, const TriStateLabelMatrix&) = default;

 private:
  std::size_t slots_ = 0;
  std::size_t classes_ = 0;
  std::vector<Label> cells_;
};

/// Loss value and its gradient with respect to the operation's primary input.
/// Matrix-valued inputs carry a row-major flattened gradient.
struct LossResult {
  double value = 0.0;
  Vector gradient;
};

struct MaskLossOptions {
  double dice_smoothing = 1.0;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
};

/// -log softmax(cos(q, e_c) / tau)[gt_class]. Row 0 of class_embeddings is the
/// "no object" entry. Gradient is with respect to q.
LossResult classification_match_loss(std::span<const double> q, const EmbeddingSet& class_embeddings,
                                     std::size_t gt_class, double tau);

/// 1 - (2 sum(p g) + eps) / (sum p + sum g + eps). Gradient w.r.t. pred.
LossResult dice_loss(std::span<const double> pred, std::span<const double> gt,
                     double smoothing = 1.0);

/// Mean of -alpha_t (1 - p_t)^gamma log p_t with p clamped to [1e-7, 1 - 1e-7].
/// Gradient w.r.t. pred (zero where the clamp is active).
LossResult focal_loss(std::span<const double> pred, std::span<const double> gt, double gamma = 2.0,
                      double alpha = 0.25);

enum class Reduction { kSum, kMean };

/// Squared matching loss over precomputed similarity scores: one score grid per
/// visual node, aligned cell-for-cell with that node's label grid. Gradient is
/// w.r.t. the scores, flattened node-major.
LossResult graph_matching_loss(std::span<const Vector> scores,
                               std::span<const TriStateLabelMatrix> labels,
                               Reduction reduction = Reduction::kSum);

/// Squared matching loss with scores s' = sigmoid(cos(v_n, t_cell) / tau).
/// cell_embeddings holds one row per label-grid cell (slot-major); rows for
/// cells that are ignore-labeled for every node are never read. Gradient is
/// w.r.t. visual_nodes, flattened row-major.
LossResult graph_matching_loss(const Matrix& visual_nodes, const Matrix& cell_embeddings,
                               std::span<const TriStateLabelMatrix> labels, double tau,
                               Reduction reduction = Reduction::kSum);

/// mask + match + alpha * sp + beta * cs
double total_loss(double mask_l, double match_l, double sp_l, double cs_l, double alpha,
                  double beta);

}  // namespace devlm
