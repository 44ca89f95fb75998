#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spmtl/coeff.hpp"
#include "spmtl/errors.hpp"
#include "spmtl/pace.hpp"
#include "spmtl/rng.hpp"
#include "spmtl/toy.hpp"

using namespace spmtl;

namespace {

Matrix random_matrix(std::uint64_t seed, Index rows, Index cols) {
  RandomStream rng(seed);
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = rng.normal();
  return m;
}

double surrogate(const Matrix& basis, const TaskData& task, const Vector& w,
                 const Vector& v, double l1) {
  const double f = smooth_value_grad(v, basis, task, w).value;
  return f + l1 * v.lpNorm<1>();
}

}  // namespace

TEST_CASE("shrink evaluates the soft threshold") {
  Vector v(1);
  v[0] = 0.5;
  CHECK(shrink(v, 0.2)[0] == doctest::Approx(0.3));
  v[0] = -0.1;
  CHECK(shrink(v, 0.2)[0] == 0.0);

  const Matrix k = random_matrix(1, 3, 4);
  CHECK(oracle::exactly_equal(shrink(k, 0.0), k));

  // Entrywise scalar recomputation.
  const Matrix s = shrink(k, 0.35);
  for (Index r = 0; r < 3; ++r)
    for (Index c = 0; c < 4; ++c) {
      const double x = k(r, c);
      const double expected =
          std::max(std::abs(x) - 0.35, 0.0) * (x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0));
      CHECK(s(r, c) == doctest::Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("shrink sparsity is nonincreasing in the threshold") {
  const Matrix k = random_matrix(2, 4, 5);
  auto nnz = [](const Matrix& m) {
    int count = 0;
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c)
        if (m(r, c) != 0.0) ++count;
    return count;
  };
  int prev = nnz(shrink(k, 0.0));
  for (double mu : {0.1, 0.3, 0.7, 1.2, 2.5}) {
    const int count = nnz(shrink(k, mu));
    CHECK(count <= prev);
    prev = count;
  }
}

TEST_CASE("smooth_value_grad: zero weights zero everything") {
  const MultiTaskDataset data = oracle::random_dataset(3, 1, 4, 6, 6);
  const Matrix basis = random_matrix(4, 4, 2);
  const Vector v = random_matrix(5, 2, 1);
  const SmoothPart part =
      smooth_value_grad(v, basis, data.tasks[0], Vector::Zero(6));
  CHECK(part.value == 0.0);
  CHECK(part.gradient.norm() == 0.0);
}

TEST_CASE("smooth_value_grad: stationary at an exact fit") {
  ToyConfig cfg;
  cfg.sigma_scale = 0.0;
  cfg.instances_per_task = 12;
  const auto [data, truth] = generate_toy(cfg);
  const Vector v = truth.coefficients.col(0);
  const SmoothPart part = smooth_value_grad(
      v, truth.basis, data.tasks[0], Vector::Ones(data.tasks[0].size()));
  CHECK(part.value <= 1e-20);
  CHECK(part.gradient.lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("smooth_value_grad matches central finite differences") {
  RandomStream rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + static_cast<int>(rng.bounded(5));
    const int k = 1 + static_cast<int>(rng.bounded(3));
    const int n = 3 + static_cast<int>(rng.bounded(8));
    const MultiTaskDataset data =
        oracle::random_dataset(500 + trial, 1, d, n, n);
    const Matrix basis = random_matrix(600 + trial, d, k);
    const Vector v = random_matrix(700 + trial, k, 1);
    Vector w(n);
    for (int j = 0; j < n; ++j) w[j] = rng.uniform();

    const SmoothPart part = smooth_value_grad(v, basis, data.tasks[0], w);
    const Vector fd = oracle::finite_difference_gradient(
        [&](const Vector& x) {
          return smooth_value_grad(x, basis, data.tasks[0], w).value;
        },
        v, 1e-6);
    CHECK((part.gradient - fd).norm() <= 1e-5 * std::max(1e-8, fd.norm()));
  }
}

TEST_CASE("prox_step") {
  Vector v(2);
  v << 1.0, 0.0;
  const Vector unchanged = prox_step(v, Vector::Zero(2), 1.0, 0.0);
  CHECK(oracle::exactly_equal(unchanged, v));

  const Vector shrunk = prox_step(v, Vector::Zero(2), 1.0, 0.4);
  CHECK(shrunk[0] == doctest::Approx(0.6));
  CHECK(shrunk[1] == 0.0);

  RandomStream rng(9);
  Vector x(5), g(5);
  for (Index i = 0; i < 5; ++i) {
    x[i] = rng.normal();
    g[i] = rng.normal();
  }
  const double s = 0.3, beta = 0.25;
  const Vector out = prox_step(x, g, s, beta);
  for (Index i = 0; i < 5; ++i) {
    const double moved = x[i] - s * g[i];
    const double expected = std::max(std::abs(moved) - beta * s, 0.0) *
                            (moved > 0 ? 1.0 : (moved < 0 ? -1.0 : 0.0));
    CHECK(out[i] == doctest::Approx(expected).epsilon(1e-15));
  }
  CHECK_THROWS_AS(prox_step(x, g, 0.0, beta), ValidationError);
}

TEST_CASE("solve_coefficients: huge l1 penalty zeroes every task") {
  const MultiTaskDataset data = oracle::random_dataset(20, 3, 4, 5, 9);
  const PaceWeights w = oracle::random_weights(21, data);
  const Matrix basis = random_matrix(22, 4, 2);
  const Matrix prev = random_matrix(23, 2, 3);
  ProxStepConfig cfg;
  cfg.l1_penalty = 1e6;
  const CoeffUpdate update = solve_coefficients(basis, data, w, prev, cfg);
  CHECK(update.coeffs.norm() == 0.0);
  CHECK(update.backtrack_exhausted.empty());
}

TEST_CASE("solve_coefficients: zero weights never increase the surrogate") {
  const MultiTaskDataset data = oracle::random_dataset(24, 2, 3, 4, 7);
  const PaceWeights w = PaceWeights::zeros_like(data);
  const Matrix basis = random_matrix(25, 3, 2);
  const Matrix prev = random_matrix(26, 2, 2);
  ProxStepConfig cfg;
  cfg.l1_penalty = 0.3;
  const CoeffUpdate update = solve_coefficients(basis, data, w, prev, cfg);
  for (Index i = 0; i < 2; ++i) {
    const double before =
        surrogate(basis, data.tasks[i], w.per_task[i], prev.col(i), 0.3);
    const double after = surrogate(basis, data.tasks[i], w.per_task[i],
                                   update.coeffs.col(i), 0.3);
    CHECK(after <= before + 1e-12);
  }
}

TEST_CASE("solve_coefficients: per-task descent on random problems") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const MultiTaskDataset data = oracle::random_dataset(30 + seed, 3, 4, 4, 9);
    const PaceWeights w = oracle::random_weights(40 + seed, data);
    const Matrix basis = random_matrix(50 + seed, 4, 2);
    const Matrix prev = random_matrix(60 + seed, 2, 3);
    ProxStepConfig cfg;
    cfg.l1_penalty = 0.2;
    const CoeffUpdate update = solve_coefficients(basis, data, w, prev, cfg);
    for (Index i = 0; i < 3; ++i) {
      const double before =
          surrogate(basis, data.tasks[i], w.per_task[i], prev.col(i), 0.2);
      const double after = surrogate(basis, data.tasks[i], w.per_task[i],
                                     update.coeffs.col(i), 0.2);
      CHECK(after <= before + 1e-12);
    }
  }
}

TEST_CASE("solve_coefficients: task order only permutes the columns") {
  const MultiTaskDataset data = oracle::random_dataset(70, 3, 4, 5, 5);
  const PaceWeights w = oracle::random_weights(71, data);
  const Matrix basis = random_matrix(72, 4, 2);
  const Matrix prev = random_matrix(73, 2, 3);
  ProxStepConfig cfg;
  cfg.l1_penalty = 0.15;
  const CoeffUpdate base = solve_coefficients(basis, data, w, prev, cfg);

  const std::vector<Index> perm = {2, 0, 1};
  MultiTaskDataset permuted;
  permuted.d = data.d;
  PaceWeights w_perm;
  Matrix prev_perm(2, 3);
  for (Index i = 0; i < 3; ++i) {
    permuted.tasks.push_back(data.tasks[perm[i]]);
    w_perm.per_task.push_back(w.per_task[perm[i]]);
    prev_perm.col(i) = prev.col(perm[i]);
  }
  const CoeffUpdate shuffled =
      solve_coefficients(basis, permuted, w_perm, prev_perm, cfg);
  for (Index i = 0; i < 3; ++i)
    CHECK(oracle::exactly_equal(Vector(shuffled.coeffs.col(i)),
                                Vector(base.coeffs.col(perm[i]))));
}

TEST_CASE("solve_coefficient_block drives the per-task subproblem to rest") {
  const MultiTaskDataset data = oracle::random_dataset(90, 3, 5, 8, 12);
  const PaceWeights w = oracle::random_weights(91, data);
  const Matrix basis = random_matrix(92, 5, 2);
  const Matrix prev = random_matrix(93, 2, 3);
  ProxStepConfig cfg;
  cfg.l1_penalty = 0.3;
  const CoeffUpdate block =
      solve_coefficient_block(basis, data, w, prev, cfg, 1e-10, 50000);

  // Never worse than the single step, and a further single step barely moves.
  const CoeffUpdate single = solve_coefficients(basis, data, w, prev, cfg);
  for (Index i = 0; i < 3; ++i) {
    const double from_block = surrogate(basis, data.tasks[i], w.per_task[i],
                                        block.coeffs.col(i), 0.3);
    const double from_single = surrogate(basis, data.tasks[i], w.per_task[i],
                                         single.coeffs.col(i), 0.3);
    CHECK(from_block <= from_single + 1e-12);
  }
  const CoeffUpdate followup =
      solve_coefficients(basis, data, w, block.coeffs, cfg);
  CHECK((followup.coeffs - block.coeffs).norm() <= 1e-7);

  CHECK_THROWS_AS(
      solve_coefficient_block(basis, data, w, prev, cfg, 1e-10, 0),
      ValidationError);
}

TEST_CASE("exhausted backtracking keeps the previous coefficients and flags") {
  const MultiTaskDataset data = oracle::random_dataset(80, 2, 3, 6, 6);
  const PaceWeights w = oracle::random_weights(81, data);
  const Matrix basis = 50.0 * random_matrix(82, 3, 2);  // huge curvature
  const Matrix prev = random_matrix(83, 2, 2);
  ProxStepConfig cfg;
  cfg.initial_step = 1e6;
  cfg.max_backtracks = 0;
  cfg.l1_penalty = 0.0;
  const CoeffUpdate update = solve_coefficients(basis, data, w, prev, cfg);
  CHECK(update.backtrack_exhausted.size() == 2);
  CHECK(oracle::exactly_equal(update.coeffs, prev));
}
