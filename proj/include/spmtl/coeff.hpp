#pragma once

#include <vector>

#include "spmtl/dataset.hpp"
#include "spmtl/pace.hpp"
#include "spmtl/types.hpp"

namespace spmtl {

/// Backtracking proximal step for the per-task coefficient update.
struct ProxStepConfig {
  double initial_step = 1.0;
  double backtrack_shrink = 0.5;  // in (0, 1)
  int max_backtracks = 50;
  double l1_penalty = 0.0;
};

struct SmoothPart {
  double value = 0.0;
  Vector gradient;
};

/// Entrywise soft-thresholding max(|K| - mu, 0) * sgn(K).
template <typename Derived>
auto shrink(const Eigen::MatrixBase<Derived>& values, double mu) {
  return ((values.derived().array().abs() - mu).max(0.0) *
          values.derived().array().sign())
      .matrix()
      .eval();
}

/// Weighted squared-loss value and gradient in the coefficient vector:
///   f(v) = (1/n) sum_j w_j (y_j - v . z_j)^2,    z_j = basis^T x_j,
///   grad = (2/n) sum_j w_j (v . z_j - y_j) z_j.
/// The projected features z are formed once per call.
SmoothPart smooth_value_grad(const Vector& coeff, const Matrix& basis,
                             const TaskData& task, const Vector& weights);

/// shrink(coeff - step * grad, l1_penalty * step).
Vector prox_step(const Vector& coeff, const Vector& grad, double step,
                 double l1_penalty);

struct CoeffUpdate {
  Matrix coeffs;
  std::vector<int> backtrack_exhausted;  // tasks left unchanged
};

/// One backtracking proximal-gradient step per task, independent across
/// tasks. The accepted step satisfies the majorization test
///   f(z) <= f(v) + grad . (z - v) + ||z - v||^2 / (2 s),
/// which guarantees the per-task objective f + l1_penalty*||.||_1 does not
/// increase. Tasks that exhaust the backtrack budget keep their previous
/// coefficients and are reported.
CoeffUpdate solve_coefficients(const Matrix& basis, const MultiTaskDataset& data,
                               const PaceWeights& weights, const Matrix& prev,
                               const ProxStepConfig& cfg);

/// Repeats the same backtracked step per task until the coefficient vector
/// stops moving (change <= inner_tol) or max_steps is reached. The step size
/// carries over and regrows by 1/backtrack_shrink after each acceptance, so
/// flat problems do not crawl at the initial step. Every accepted step
/// passes the majorization test; the per-task objective is nonincreasing
/// across the whole block update.
CoeffUpdate solve_coefficient_block(const Matrix& basis,
                                    const MultiTaskDataset& data,
                                    const PaceWeights& weights,
                                    const Matrix& prev,
                                    const ProxStepConfig& cfg,
                                    double inner_tol, int max_steps);

}  // namespace spmtl
