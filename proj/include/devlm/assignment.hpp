#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "devlm/losses.hpp"
#include "devlm/tensor.hpp"

namespace devlm {

/// Matched (query, ground truth) pairs plus the queries left without a match.
struct AssignmentResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by query
  std::vector<std::size_t> unmatched_queries;              // ascending
  double total_cost = 0.0;
};

/// Minimum-cost injective assignment between rows (queries) and columns
/// (ground truths) of a possibly rectangular cost matrix; min(rows, cols)
/// pairs are formed. Among optimal assignments the lexicographically smallest
/// sorted pair list is returned. Throws DomainError on non-finite costs.
///
/// Runs one O(n^3) shortest-augmenting-path solve, then a greedy
/// lexicographic refinement that re-solves sub-problems, O(n^5) overall; meant
/// for the small per-image matrices of set prediction.
AssignmentResult hungarian(const Matrix& cost);

/// cost(q, g) = -P[q][gt_classes[g]] + lambda_mask * (dice + focal)(mask_q, gt_mask_g)
Matrix build_assignment_cost(const Matrix& query_class_probs,
                             const std::vector<Vector>& query_masks,
                             const std::vector<std::size_t>& gt_classes,
                             const std::vector<Vector>& gt_masks, double lambda_mask = 1.0,
                             const MaskLossOptions& mask_options = {});

}  // namespace devlm
