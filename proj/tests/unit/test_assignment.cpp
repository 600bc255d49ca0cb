#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "devlm/assignment.hpp"
#include "devlm/errors.hpp"
#include "oracles.hpp"

using namespace devlm;

using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

namespace {

void check_structure(const AssignmentResult& r, const Matrix& cost) {
  std::set<std::size_t> queries, truths;
  for (const auto& [q, g] : r.pairs) {
    CHECK(queries.insert(q).second);
    CHECK(truths.insert(g).second);
  }
  for (std::size_t q : r.unmatched_queries) CHECK(queries.insert(q).second);
  CHECK(queries.size() == cost.rows());
  CHECK(r.pairs.size() == std::min(cost.rows(), cost.cols()));
  double total = 0.0;
  for (const auto& [q, g] : r.pairs) total += cost(q, g);
  CHECK(total == doctest::Approx(r.total_cost).epsilon(1e-12));
}

}  // namespace

TEST_CASE("hungarian examples") {
  const Matrix eye = Matrix::from_rows({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
  const AssignmentResult a = hungarian(eye);
  CHECK(a.pairs == Pairs{{0, 0}, {1, 1}, {2, 2}});
  CHECK(a.total_cost == 0.0);

  const AssignmentResult b = hungarian(Matrix::from_rows({{1, 2}, {2, 1}, {3, 3}}));
  CHECK(b.pairs == Pairs{{0, 0}, {1, 1}});
  CHECK(b.unmatched_queries == std::vector<std::size_t>{2});
  CHECK(b.total_cost == 2.0);

  CHECK(hungarian(Matrix::from_rows({{-4.5}})).pairs == Pairs{{0, 0}});
}

TEST_CASE("hungarian rejects non-finite costs") {
  CHECK_THROWS_AS(hungarian(Matrix::from_rows({{1, std::numeric_limits<double>::infinity()}})),
                  DomainError);
  CHECK_THROWS_AS(hungarian(Matrix::from_rows({{std::nan("")}})), DomainError);
}

TEST_CASE("hungarian matches exhaustive search on random rectangular costs") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  for (int t = 0; t < 60; ++t) {
    const Matrix cost = oracle::random_matrix(rng, dim(rng), dim(rng), -2, 3);
    const AssignmentResult r = hungarian(cost);
    check_structure(r, cost);
    CHECK(r.total_cost == doctest::Approx(oracle::brute_force_assignment(cost)).epsilon(1e-12));
  }
}

TEST_CASE("hungarian breaks ties toward the lexicographically smallest pair list") {
  const Matrix flat(3, 3, 1.0);
  CHECK(hungarian(flat).pairs == Pairs{{0, 0}, {1, 1}, {2, 2}});
  const Matrix tall(4, 2, 0.0);
  const AssignmentResult r = hungarian(tall);
  CHECK(r.pairs == Pairs{{0, 0}, {1, 1}});
  CHECK(r.unmatched_queries == std::vector<std::size_t>{2, 3});
}

TEST_CASE("hungarian is invariant to a constant shift of every cost") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 30; ++t) {
    const Matrix cost = oracle::random_matrix(rng, 5, 4);
    Matrix shifted = cost;
    for (double& x : shifted.values()) x += 7.25;
    CHECK(hungarian(cost).pairs == hungarian(shifted).pairs);
  }
}

TEST_CASE("assignment cost examples") {
  const Matrix probs = Matrix::from_rows({{0.0, 1.0}});
  const Vector mask{1, 0, 1, 1};
  const Matrix perfect = build_assignment_cost(probs, {mask}, {1}, {mask});
  CHECK(perfect(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));

  const Matrix p2 = Matrix::from_rows({{0.2, 0.5, 0.3}, {0.6, 0.1, 0.3}});
  const std::vector<Vector> qm{{0.9, 0.1, 0.4}, {0.2, 0.8, 0.5}};
  const std::vector<Vector> gm{{1, 0, 0}, {0, 1, 1}};
  const std::vector<std::size_t> gc{2, 0};
  const Matrix pure = build_assignment_cost(p2, qm, gc, gm, 0.0);
  for (std::size_t q = 0; q < 2; ++q)
    for (std::size_t g = 0; g < 2; ++g) CHECK(pure(q, g) == -p2(q, gc[g]));

  const Matrix full = build_assignment_cost(p2, qm, gc, gm, 1.5);
  for (std::size_t q = 0; q < 2; ++q)
    for (std::size_t g = 0; g < 2; ++g) {
      const double expected =
          -p2(q, gc[g]) + 1.5 * (dice_loss(qm[q], gm[g]).value + focal_loss(qm[q], gm[g]).value);
      CHECK(full(q, g) == doctest::Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("assignment cost shape errors") {
  const Matrix probs = Matrix::from_rows({{0.5, 0.5}});
  CHECK_THROWS_AS(build_assignment_cost(probs, {}, {0}, {{1}}), ShapeError);
  CHECK_THROWS_AS(build_assignment_cost(probs, {{1}}, {0, 1}, {{1}}), ShapeError);
  CHECK_THROWS_AS(build_assignment_cost(probs, {{1, 0}}, {0}, {{1}}), ShapeError);
}
