#pragma once

#include <cstddef>
#include <vector>

#include "devlm/tensor.hpp"

namespace devlm {

/// Row and column mass targets of a transport plan. Construction rejects
/// non-positive targets and unequal totals (ValidationError).
class MarginalSpec {
 public:
  static constexpr double kTotalTolerance = 1e-9;

  MarginalSpec(Vector row_targets, Vector col_targets);

  /// Subgraph matching marginals: every visual node carries
  /// linguistic_nodes / visual_nodes, every linguistic node carries 1.
  static MarginalSpec for_subgraph(std::size_t visual_nodes, std::size_t linguistic_nodes);
  static MarginalSpec uniform(std::size_t rows, double row_target, std::size_t cols,
                              double col_target);

  const Vector& row_targets() const { return rows_; }
  const Vector& col_targets() const { return cols_; }
  double total() const;

 private:
  Vector rows_;
  Vector cols_;
};

struct SinkhornOptions {
  double epsilon = 0.1;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
};

struct TransportPlan {
  Matrix plan;
  bool converged = false;
  double marginal_error = 0.0;
  std::size_t iterations = 0;
};

/// Entry (i, j) = cos(visual_i, linguistic_j).
Matrix affinity_matrix(const EmbeddingSet& visual_nodes, const EmbeddingSet& linguistic_nodes);
Matrix affinity_matrix(const Matrix& visual_nodes, const Matrix& linguistic_nodes);

/// Entropic projection of exp(affinity / epsilon) onto the marginals by
/// alternating log-domain scaling. Stops once the largest row or column
/// deviation is within tol, or after max_iter sweeps.
TransportPlan sinkhorn_normalize(const Matrix& affinity, const MarginalSpec& marginals,
                                 const SinkhornOptions& options = {});

/// Largest absolute deviation of the plan's row/column sums from the targets.
double marginal_error(const Matrix& plan, const MarginalSpec& marginals);

/// Column of the largest entry in each row; ties go to the lowest column.
std::vector<std::size_t> argmax_match(const Matrix& plan);
inline std::vector<std::size_t> argmax_match(const TransportPlan& plan) {
  return argmax_match(plan.plan);
}

}  // namespace devlm
