#include "devlm/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "devlm/errors.hpp"

namespace devlm {

namespace {

constexpr double kTieTolerance = 1e-9;

// Shortest augmenting path with potentials for an n x m cost with n <= m.
// Returns the column assigned to every row.
std::vector<std::size_t> solve_wide(const Matrix& a) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of_row(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) col_of_row[p[j] - 1] = j - 1;
  }
  return col_of_row;
}

// Optimal cost over min(rows, cols) pairs of the sub-matrix picked by the
// given row/column index lists.
double optimal_cost(const Matrix& cost, const std::vector<std::size_t>& rows,
                    const std::vector<std::size_t>& cols) {
  if (rows.empty() || cols.empty()) return 0.0;
  const bool transpose = rows.size() > cols.size();
  const auto& outer = transpose ? cols : rows;
  const auto& inner = transpose ? rows : cols;
  Matrix sub(outer.size(), inner.size());
  for (std::size_t i = 0; i < outer.size(); ++i)
    for (std::size_t j = 0; j < inner.size(); ++j)
      sub(i, j) = transpose ? cost(inner[j], outer[i]) : cost(outer[i], inner[j]);
  const auto match = solve_wide(sub);
  double total = 0.0;
  for (std::size_t i = 0; i < match.size(); ++i) total += sub(i, match[i]);
  return total;
}

}  // namespace

AssignmentResult hungarian(const Matrix& cost) {
  if (!all_finite(cost.values())) throw DomainError("hungarian: cost matrix has non-finite entries");
  AssignmentResult result;
  const std::size_t rows = cost.rows();
  const std::size_t cols = cost.cols();
  if (rows == 0 || cols == 0) {
    for (std::size_t q = 0; q < rows; ++q) result.unmatched_queries.push_back(q);
    return result;
  }

  std::vector<std::size_t> all_rows(rows), all_cols(cols);
  for (std::size_t i = 0; i < rows; ++i) all_rows[i] = i;
  for (std::size_t j = 0; j < cols; ++j) all_cols[j] = j;
  const double best = optimal_cost(cost, all_rows, all_cols);
  const std::size_t target_pairs = std::min(rows, cols);

  double scale = 1.0;
  for (double x : cost.values()) scale = std::max(scale, std::abs(x));
  const double tie = kTieTolerance * scale * static_cast<double>(target_pairs);

  // Greedy lexicographic refinement: each query takes the smallest ground
  // truth that still admits an optimal completion, else stays unmatched.
  std::vector<char> col_used(cols, 0);
  double fixed = 0.0;
  for (std::size_t q = 0; q < rows; ++q) {
    std::vector<std::size_t> rest_rows;
    for (std::size_t r = q + 1; r < rows; ++r) rest_rows.push_back(r);
    const std::size_t needed_after = target_pairs - result.pairs.size();
    bool placed = false;
    for (std::size_t g = 0; g < cols && needed_after > 0; ++g) {
      if (col_used[g]) continue;
      std::vector<std::size_t> rest_cols;
      for (std::size_t j = 0; j < cols; ++j)
        if (!col_used[j] && j != g) rest_cols.push_back(j);
      if (std::min(rest_rows.size(), rest_cols.size()) + 1 < needed_after) continue;
      const double completion = optimal_cost(cost, rest_rows, rest_cols);
      if (fixed + cost(q, g) + completion <= best + tie) {
        result.pairs.emplace_back(q, g);
        col_used[g] = 1;
        fixed += cost(q, g);
        placed = true;
        break;
      }
    }
    if (!placed) result.unmatched_queries.push_back(q);
  }
  result.total_cost = fixed;
  return result;
}

Matrix build_assignment_cost(const Matrix& query_class_probs,
                             const std::vector<Vector>& query_masks,
                             const std::vector<std::size_t>& gt_classes,
                             const std::vector<Vector>& gt_masks, double lambda_mask,
                             const MaskLossOptions& mask_options) {
  const std::size_t queries = query_class_probs.rows();
  if (query_masks.size() != queries) {
    throw ShapeError("build_assignment_cost: " + std::to_string(query_masks.size()) +
                     " masks for " + std::to_string(queries) + " queries");
  }
  if (gt_masks.size() != gt_classes.size()) {
    throw ShapeError("build_assignment_cost: ground-truth class and mask counts differ");
  }
  Matrix cost(queries, gt_classes.size());
  for (std::size_t g = 0; g < gt_classes.size(); ++g) {
    if (gt_classes[g] >= query_class_probs.cols()) {
      throw IndexError("build_assignment_cost: ground-truth class " +
                       std::to_string(gt_classes[g]) + " out of range");
    }
  }
  for (std::size_t q = 0; q < queries; ++q) {
    for (std::size_t g = 0; g < gt_classes.size(); ++g) {
      double c = -query_class_probs(q, gt_classes[g]);
      if (lambda_mask != 0.0) {
        const double mask_cost =
            dice_loss(query_masks[q], gt_masks[g], mask_options.dice_smoothing).value +
            focal_loss(query_masks[q], gt_masks[g], mask_options.focal_gamma,
                       mask_options.focal_alpha)
                .value;
        c += lambda_mask * mask_cost;
      }
      cost(q, g) = c;
    }
  }
  return cost;
}

}  // namespace devlm
