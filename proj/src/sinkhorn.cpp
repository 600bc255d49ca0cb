#include "devlm/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "devlm/errors.hpp"

namespace devlm {

MarginalSpec::MarginalSpec(Vector row_targets, Vector col_targets)
    : rows_(std::move(row_targets)), cols_(std::move(col_targets)) {
  if (rows_.empty() || cols_.empty()) throw ValidationError("MarginalSpec: empty marginals");
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!std::all_of(rows_.begin(), rows_.end(), positive) ||
      !std::all_of(cols_.begin(), cols_.end(), positive)) {
    throw ValidationError("MarginalSpec: targets must be positive and finite");
  }
  const double row_total = std::accumulate(rows_.begin(), rows_.end(), 0.0);
  const double col_total = std::accumulate(cols_.begin(), cols_.end(), 0.0);
  if (std::abs(row_total - col_total) > kTotalTolerance * std::max(1.0, row_total)) {
    throw ValidationError("MarginalSpec: row total " + std::to_string(row_total) +
                          " differs from column total " + std::to_string(col_total) +
                          " (row and column marginals must carry equal total mass)");
  }
}

MarginalSpec MarginalSpec::for_subgraph(std::size_t visual_nodes, std::size_t linguistic_nodes) {
  return uniform(visual_nodes,
                 static_cast<double>(linguistic_nodes) / static_cast<double>(visual_nodes),
                 linguistic_nodes, 1.0);
}

MarginalSpec MarginalSpec::uniform(std::size_t rows, double row_target, std::size_t cols,
                                   double col_target) {
  return MarginalSpec(Vector(rows, row_target), Vector(cols, col_target));
}

double MarginalSpec::total() const { return std::accumulate(rows_.begin(), rows_.end(), 0.0); }

Matrix affinity_matrix(const Matrix& visual_nodes, const Matrix& linguistic_nodes) {
  if (visual_nodes.cols() != linguistic_nodes.cols()) {
    throw ShapeError("affinity_matrix: embedding dimensions differ (" +
                     std::to_string(visual_nodes.cols()) + " vs " +
                     std::to_string(linguistic_nodes.cols()) + ")");
  }
  Matrix a(visual_nodes.rows(), linguistic_nodes.rows());
  for (std::size_t i = 0; i < visual_nodes.rows(); ++i)
    for (std::size_t j = 0; j < linguistic_nodes.rows(); ++j)
      a(i, j) = cosine_similarity(visual_nodes.row(i), linguistic_nodes.row(j));
  return a;
}

Matrix affinity_matrix(const EmbeddingSet& visual_nodes, const EmbeddingSet& linguistic_nodes) {
  return affinity_matrix(visual_nodes.vectors, linguistic_nodes.vectors);
}

double marginal_error(const Matrix& plan, const MarginalSpec& marginals) {
  const auto& r = marginals.row_targets();
  const auto& c = marginals.col_targets();
  if (plan.rows() != r.size() || plan.cols() != c.size()) {
    throw ShapeError("marginal_error: plan shape does not match marginals");
  }
  double err = 0.0;
  Vector col_sums(plan.cols(), 0.0);
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < plan.cols(); ++j) {
      row_sum += plan(i, j);
      col_sums[j] += plan(i, j);
    }
    err = std::max(err, std::abs(row_sum - r[i]));
  }
  for (std::size_t j = 0; j < plan.cols(); ++j) err = std::max(err, std::abs(col_sums[j] - c[j]));
  return err;
}

TransportPlan sinkhorn_normalize(const Matrix& affinity, const MarginalSpec& marginals,
                                 const SinkhornOptions& options) {
  if (!(options.epsilon > 0.0)) throw DomainError("sinkhorn_normalize: epsilon must be positive");
  if (!all_finite(affinity.values())) {
    throw DomainError("sinkhorn_normalize: affinity has non-finite entries");
  }
  const std::size_t n = affinity.rows();
  const std::size_t m = affinity.cols();
  if (n != marginals.row_targets().size() || m != marginals.col_targets().size()) {
    throw ShapeError("sinkhorn_normalize: affinity is " + std::to_string(n) + "x" +
                     std::to_string(m) + " but marginals are " +
                     std::to_string(marginals.row_targets().size()) + "x" +
                     std::to_string(marginals.col_targets().size()));
  }

  Matrix kernel(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) kernel(i, j) = affinity(i, j) / options.epsilon;

  Vector log_r(n), log_c(m);
  for (std::size_t i = 0; i < n; ++i) log_r[i] = std::log(marginals.row_targets()[i]);
  for (std::size_t j = 0; j < m; ++j) log_c[j] = std::log(marginals.col_targets()[j]);

  Vector f(n, 0.0), g(m, 0.0);
  Vector buf_row(m), buf_col(n);
  auto assemble = [&] {
    Matrix plan(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) plan(i, j) = std::exp(kernel(i, j) + f[i] + g[j]);
    return plan;
  };

  TransportPlan out;
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) buf_row[j] = kernel(i, j) + g[j];
      f[i] = log_r[i] - log_sum_exp(buf_row);
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) buf_col[i] = kernel(i, j) + f[i];
      g[j] = log_c[j] - log_sum_exp(buf_col);
    }
    out.iterations = it + 1;
    out.plan = assemble();
    out.marginal_error = marginal_error(out.plan, marginals);
    if (out.marginal_error <= options.tol) {
      out.converged = true;
      break;
    }
  }
  if (out.iterations == 0) {
    out.plan = assemble();
    out.marginal_error = marginal_error(out.plan, marginals);
  }
  return out;
}

std::vector<std::size_t> argmax_match(const Matrix& plan) {
  std::vector<std::size_t> match(plan.rows(), 0);
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    auto row = plan.row(i);
    match[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return match;
}

}  // namespace devlm
