#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace devlm {

using Vector = std::vector<double>;

namespace tol {
/// Slack allowed on |cos| above 1 from rounding.
inline constexpr double kCosineSlack = 1e-12;
/// Lower/upper clamp applied to probabilities before taking logs.
inline constexpr double kProbClamp = 1e-7;
}  // namespace tol

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);
  /// Builds a matrix from nested rows; all rows must have equal length.
  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  Vector row_copy(std::size_t r) const;

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  std::vector<Vector> to_rows() const;
  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// A stack of embeddings with one identity tag per row.
struct EmbeddingSet {
  Matrix vectors;
  std::vector<std::string> tags;

  std::size_t size() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }
  std::span<const double> operator[](std::size_t i) const { return vectors.row(i); }

  static EmbeddingSet from_rows(const std::vector<Vector>& rows,
                                std::vector<std::string> tags = {});
};

double dot(std::span<const double> u, std::span<const double> v);
double norm(std::span<const double> u);
Vector normalized(std::span<const double> u);

/// y = A x
Vector matvec(const Matrix& a, std::span<const double> x);
/// y = A^T x
Vector matvec_transposed(const Matrix& a, std::span<const double> x);
/// A += scale * u v^T
void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v, double scale = 1.0);
/// y += scale * x
void axpy(double scale, std::span<const double> x, std::span<double> y);

bool all_finite(std::span<const double> values);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// d cos(u, v) / du.
Vector cosine_gradient(std::span<const double> u, std::span<const double> v);

double sigmoid(double x);

/// 1 / (1 + exp(-cos(u, v) / tau)).
double scaled_sigmoid_similarity(std::span<const double> u, std::span<const double> v, double tau);

/// softmax(logits / tau), max-subtracted.
Vector softmax_with_temperature(std::span<const double> logits, double tau);

/// log(sum(exp(x))), max-subtracted.
double log_sum_exp(std::span<const double> x);

/// Indices of the k largest scores in descending score order. Ties go to the
/// lower index. Returns every index when fewer than k scores exist.
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                  const Vector& x, double h);

}  // namespace devlm
