#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "devlm/errors.hpp"
#include "devlm/tensor.hpp"
#include "oracles.hpp"

using namespace devlm;

TEST_CASE("cosine similarity examples") {
  CHECK(cosine_similarity(Vector{1, 2, 3}, Vector{1, 2, 3}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(Vector{1, 0}, Vector{0, 1}) == 0.0);
  CHECK(cosine_similarity(Vector{1, 2}, Vector{2, 1}) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("cosine similarity errors") {
  CHECK_THROWS_AS(cosine_similarity(Vector{0, 0}, Vector{1, 0}), DomainError);
  CHECK_THROWS_AS(cosine_similarity(Vector{1, 0}, Vector{1, 0, 0}), ShapeError);
}

TEST_CASE("cosine similarity is symmetric, bounded and one on itself") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const Vector u = oracle::random_vector(rng, 7, -100, 100);
    const Vector v = oracle::random_vector(rng, 7, -1e-3, 1e-3);
    CHECK(std::abs(cosine_similarity(u, u) - 1.0) < 1e-12);
    CHECK(std::abs(cosine_similarity(u, v)) <= 1.0 + tol::kCosineSlack);
    CHECK(cosine_similarity(u, v) == cosine_similarity(v, u));
  }
}

TEST_CASE("scaled sigmoid similarity examples") {
  CHECK(scaled_sigmoid_similarity(Vector{1, 0}, Vector{0, 1}, 0.3) == 0.5);
  CHECK(std::abs(scaled_sigmoid_similarity(Vector{1, 2}, Vector{1, 2}, 0.01) - 1.0) < 1e-12);
  CHECK(scaled_sigmoid_similarity(Vector{1, 2}, Vector{-1, -2}, 1.0) ==
        doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-14));
  CHECK(scaled_sigmoid_similarity(Vector{1, 2}, Vector{-1, -2}, 1.0) == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK_THROWS_AS(scaled_sigmoid_similarity(Vector{1}, Vector{1}, 0.0), DomainError);
  CHECK_THROWS_AS(scaled_sigmoid_similarity(Vector{1}, Vector{1}, -1.0), DomainError);
}

TEST_CASE("scaled sigmoid is in (0,1) and monotone in the cosine") {
  std::mt19937_64 rng(5);
  std::vector<std::pair<double, double>> pairs;
  for (int t = 0; t < 300; ++t) {
    const Vector u = oracle::random_vector(rng, 5);
    const Vector v = oracle::random_vector(rng, 5);
    const double s = scaled_sigmoid_similarity(u, v, 0.5);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    pairs.emplace_back(cosine_similarity(u, v), s);
  }
  std::sort(pairs.begin(), pairs.end());
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    if (pairs[i].first > pairs[i - 1].first) CHECK(pairs[i].second >= pairs[i - 1].second);
  }
}

TEST_CASE("softmax examples") {
  const Vector eq = softmax_with_temperature(Vector{3, 3, 3, 3}, 0.7);
  for (double p : eq) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));
  const Vector p = softmax_with_temperature(Vector{1, 0}, 1.0);
  const double e = std::exp(1.0);
  CHECK(p[0] == doctest::Approx(e / (e + 1)).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(1 / (e + 1)).epsilon(1e-14));
  CHECK(softmax_with_temperature(Vector{1, 0}, 0.01)[0] > 1.0 - 1e-12);
  CHECK_THROWS_AS(softmax_with_temperature(Vector{1, 0}, 0.0), DomainError);
}

TEST_CASE("softmax sums to one across logit magnitudes") {
  std::mt19937_64 rng(3);
  for (double scale : {1e-3, 1e-1, 1.0, 1e1, 1e2, 1e3}) {
    for (int t = 0; t < 20; ++t) {
      const Vector p = softmax_with_temperature(oracle::random_vector(rng, 9, -scale, scale), 1.0);
      double sum = 0.0;
      for (double x : p) {
        CHECK(std::isfinite(x));
        CHECK(x >= 0.0);
        sum += x;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("log-sum-exp does not overflow") {
  CHECK(log_sum_exp(Vector{1000, 1000}) == doctest::Approx(1000 + std::log(2.0)));
  CHECK(log_sum_exp(Vector{-1000, -1000}) == doctest::Approx(-1000 + std::log(2.0)));
}

TEST_CASE("top-k examples") {
  CHECK(top_k_indices(Vector{0.1, 0.9, 0.5}, 2) == std::vector<std::size_t>{1, 2});
  CHECK(top_k_indices(Vector{0.5, 0.5}, 1) == std::vector<std::size_t>{0});
  CHECK(top_k_indices(Vector{0.3}, 3) == std::vector<std::size_t>{0});
  CHECK(top_k_indices(Vector{}, 2).empty());
}

TEST_CASE("top-k is permutation consistent") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    // Distinct scores, so the tie rule does not interfere.
    Vector scores = oracle::random_vector(rng, 8);
    std::vector<std::size_t> perm(scores.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Vector permuted(scores.size());
    for (std::size_t i = 0; i < perm.size(); ++i) permuted[perm[i]] = scores[i];
    const auto a = top_k_indices(scores, 3);
    const auto b = top_k_indices(permuted, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == perm[a[i]]);
    CHECK(top_k_indices(scores, 3) == a);
  }
}

TEST_CASE("top-k ties go to the lower index") {
  CHECK(top_k_indices(Vector{0.2, 0.7, 0.7, 0.2, 0.7}, 4) == std::vector<std::size_t>{1, 2, 4, 0});
}

TEST_CASE("finite difference gradient examples") {
  auto sq = [](const Vector& x) { return x[0] * x[0] + x[1] * x[1]; };
  const Vector g = finite_difference_gradient(sq, Vector{1, 2}, 1e-5);
  CHECK(std::abs(g[0] - 2) < 1e-6);
  CHECK(std::abs(g[1] - 4) < 1e-6);
  const Vector z = finite_difference_gradient([](const Vector&) { return 3.0; }, Vector{1, 2, 3}, 1e-5);
  for (double x : z) CHECK(x == 0.0);
  const Vector ones = finite_difference_gradient(
      [](const Vector& x) { return std::accumulate(x.begin(), x.end(), 0.0); }, Vector{-4, 0.5, 9},
      1e-5);
  for (double x : ones) CHECK(x == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("finite difference propagates non-finite evaluations") {
  auto bad = [](const Vector& x) { return x[0] > 0 ? std::log(-1.0) : 0.0; };
  CHECK_THROWS(finite_difference_gradient(bad, Vector{0.0}, 1e-5));
}

TEST_CASE("matrix construction checks its shape") {
  CHECK_THROWS_AS(Matrix(2, 2, Vector{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Matrix::from_rows({{1, 2}, {3}}), ShapeError);
  const Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.transposed()(2, 1) == 6);
  CHECK(matvec(m, Vector{1, 1, 1}) == Vector{6, 15});
  CHECK(matvec_transposed(m, Vector{1, 1}) == Vector{5, 7, 9});
}
