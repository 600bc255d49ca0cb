#include "devlm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "devlm/errors.hpp"

namespace devlm {

namespace {

void require_same_dim(std::span<const double> u, std::span<const double> v, const char* op) {
  if (u.size() != v.size()) {
    throw ShapeError(std::string(op) + ": dimension mismatch (" + std::to_string(u.size()) +
                     " vs " + std::to_string(v.size()) + ")");
  }
}

void require_positive_tau(double tau, const char* op) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw DomainError(std::string(op) + ": temperature must be positive");
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: value count " + std::to_string(values_.size()) +
                     " does not equal rows*cols " + std::to_string(rows_ * cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      throw ShapeError("Matrix::from_rows: row " + std::to_string(r) + " has length " +
                       std::to_string(rows[r].size()) + ", expected " + std::to_string(cols));
    }
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Vector Matrix::row_copy(std::size_t r) const {
  auto view = row(r);
  return {view.begin(), view.end()};
}

std::vector<Vector> Matrix::to_rows() const {
  std::vector<Vector> out;
  out.reserve(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out.push_back(row_copy(r));
  return out;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

EmbeddingSet EmbeddingSet::from_rows(const std::vector<Vector>& rows,
                                     std::vector<std::string> tags) {
  EmbeddingSet set{Matrix::from_rows(rows), std::move(tags)};
  if (set.tags.empty()) {
    for (std::size_t i = 0; i < rows.size(); ++i) set.tags.push_back(std::to_string(i));
  }
  if (set.tags.size() != rows.size()) throw ShapeError("EmbeddingSet: tag count mismatch");
  return set;
}

double dot(std::span<const double> u, std::span<const double> v) {
  require_same_dim(u, v, "dot");
  return std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
}

double norm(std::span<const double> u) { return std::sqrt(dot(u, u)); }

Vector normalized(std::span<const double> u) {
  const double n = norm(u);
  if (!(n > 0.0)) throw DomainError("normalized: zero-norm vector");
  Vector out(u.begin(), u.end());
  for (double& x : out) x /= n;
  return out;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: matrix cols != vector size");
  Vector y(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) y[r] = dot(a.row(r), x);
  return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw ShapeError("matvec_transposed: matrix rows != vector size");
  Vector y(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) axpy(x[r], a.row(r), y);
  return y;
}

void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v, double scale) {
  if (a.rows() != u.size() || a.cols() != v.size()) throw ShapeError("add_outer: shape mismatch");
  for (std::size_t r = 0; r < a.rows(); ++r) axpy(scale * u[r], v, a.row(r));
}

void axpy(double scale, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ShapeError("axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += scale * x[i];
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  require_same_dim(u, v, "cosine_similarity");
  const double nu = norm(u);
  const double nv = norm(v);
  if (!(nu > 0.0) || !(nv > 0.0)) throw DomainError("cosine_similarity: zero-norm input");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

Vector cosine_gradient(std::span<const double> u, std::span<const double> v) {
  require_same_dim(u, v, "cosine_gradient");
  const double nu = norm(u);
  const double nv = norm(v);
  if (!(nu > 0.0) || !(nv > 0.0)) throw DomainError("cosine_gradient: zero-norm input");
  const double cos = dot(u, v) / (nu * nv);
  Vector g(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) g[i] = v[i] / (nu * nv) - cos * u[i] / (nu * nu);
  return g;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double scaled_sigmoid_similarity(std::span<const double> u, std::span<const double> v, double tau) {
  require_positive_tau(tau, "scaled_sigmoid_similarity");
  return sigmoid(cosine_similarity(u, v) / tau);
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) throw ShapeError("log_sum_exp: empty input");
  const double mx = *std::max_element(x.begin(), x.end());
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

Vector softmax_with_temperature(std::span<const double> logits, double tau) {
  require_positive_tau(tau, "softmax_with_temperature");
  if (logits.empty()) throw ShapeError("softmax_with_temperature: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / tau);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t take = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  idx.resize(take);
  return idx;
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                  const Vector& x, double h) {
  if (!(h > 0.0)) throw DomainError("finite_difference_gradient: step must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw DomainError("finite_difference_gradient: non-finite evaluation at coordinate " +
                        std::to_string(i));
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace devlm
