#include "spmtl/coeff.hpp"

#include <cmath>

#include "spmtl/errors.hpp"

namespace spmtl {

namespace {

void check_prox_config(const ProxStepConfig& cfg) {
  if (!(cfg.initial_step > 0.0))
    throw ValidationError("prox config: initial_step must be > 0");
  if (!(cfg.backtrack_shrink > 0.0 && cfg.backtrack_shrink < 1.0))
    throw ValidationError("prox config: backtrack_shrink must lie in (0, 1)");
  if (cfg.max_backtracks < 0)
    throw ValidationError("prox config: max_backtracks must be >= 0");
  if (cfg.l1_penalty < 0.0)
    throw ValidationError("prox config: l1_penalty must be >= 0");
}

}  // namespace

SmoothPart smooth_value_grad(const Vector& coeff, const Matrix& basis,
                             const TaskData& task, const Vector& weights) {
  if (basis.rows() != task.features.cols())
    throw ValidationError("smooth_value_grad: basis rows do not match d");
  if (coeff.size() != basis.cols())
    throw ValidationError("smooth_value_grad: coeff length does not match k");
  if (weights.size() != task.size())
    throw ValidationError("smooth_value_grad: weight length mismatch");

  const double inv_n = 1.0 / static_cast<double>(task.size());
  const Matrix projected = task.features * basis;  // n x k
  const Vector residual = projected * coeff - task.targets;

  SmoothPart part;
  part.value = inv_n * (weights.array() * residual.array().square()).sum();
  part.gradient = 2.0 * inv_n * projected.transpose() *
                  (weights.array() * residual.array()).matrix();
  return part;
}

Vector prox_step(const Vector& coeff, const Vector& grad, double step,
                 double l1_penalty) {
  if (!(step > 0.0)) throw ValidationError("prox_step: step must be > 0");
  return shrink(coeff - step * grad, l1_penalty * step);
}

namespace {

// One backtracked prox step on a task whose projected features are already
// formed. `step` is read and updated in place. Returns false when the
// backtrack budget runs out (coefficients unchanged).
bool backtracked_step(const Matrix& projected, const TaskData& task,
                      const Vector& w, const ProxStepConfig& cfg, Vector& v,
                      double& step) {
  const double inv_n = 1.0 / static_cast<double>(task.size());
  const Vector residual0 = projected * v - task.targets;
  const double f0 = inv_n * (w.array() * residual0.array().square()).sum();
  const Vector grad = 2.0 * inv_n * projected.transpose() *
                      (w.array() * residual0.array()).matrix();

  for (int attempt = 0; attempt <= cfg.max_backtracks; ++attempt) {
    const Vector candidate = prox_step(v, grad, step, cfg.l1_penalty);
    const Vector gap = candidate - v;
    const Vector residual = projected * candidate - task.targets;
    const double f_candidate =
        inv_n * (w.array() * residual.array().square()).sum();
    const double majorizer =
        f0 + grad.dot(gap) + gap.squaredNorm() / (2.0 * step);
    if (f_candidate <= majorizer) {
      v = candidate;
      return true;
    }
    step *= cfg.backtrack_shrink;
  }
  return false;
}

void check_coeff_shapes(const Matrix& basis, const MultiTaskDataset& data,
                        const PaceWeights& weights, const Matrix& prev) {
  if (prev.cols() != data.task_count() || prev.rows() != basis.cols())
    throw ValidationError("solve_coefficients: prev coeff shape mismatch");
  if (weights.per_task.size() != data.tasks.size())
    throw ValidationError("solve_coefficients: weights do not match tasks");
}

}  // namespace

CoeffUpdate solve_coefficients(const Matrix& basis, const MultiTaskDataset& data,
                               const PaceWeights& weights, const Matrix& prev,
                               const ProxStepConfig& cfg) {
  check_prox_config(cfg);
  check_coeff_shapes(basis, data, weights, prev);

  CoeffUpdate update;
  update.coeffs = prev;
  for (Index i = 0; i < data.task_count(); ++i) {
    const Matrix projected = data.tasks[i].features * basis;
    Vector v = prev.col(i);
    double step = cfg.initial_step;
    if (backtracked_step(projected, data.tasks[i], weights.per_task[i], cfg, v,
                         step))
      update.coeffs.col(i) = v;
    else
      update.backtrack_exhausted.push_back(static_cast<int>(i));
  }
  return update;
}

CoeffUpdate solve_coefficient_block(const Matrix& basis,
                                    const MultiTaskDataset& data,
                                    const PaceWeights& weights,
                                    const Matrix& prev,
                                    const ProxStepConfig& cfg,
                                    double inner_tol, int max_steps) {
  check_prox_config(cfg);
  check_coeff_shapes(basis, data, weights, prev);
  if (max_steps < 1)
    throw ValidationError("solve_coefficient_block: max_steps must be >= 1");

  CoeffUpdate update;
  update.coeffs = prev;
  for (Index i = 0; i < data.task_count(); ++i) {
    const Matrix projected = data.tasks[i].features * basis;
    Vector v = prev.col(i);
    double step = cfg.initial_step;
    bool stalled = false;
    for (int s = 0; s < max_steps; ++s) {
      const Vector before = v;
      if (!backtracked_step(projected, data.tasks[i], weights.per_task[i], cfg,
                            v, step)) {
        stalled = (s == 0);
        break;
      }
      step /= cfg.backtrack_shrink;  // regrow for the next step
      if ((v - before).norm() <= inner_tol) break;
    }
    update.coeffs.col(i) = v;
    if (stalled) update.backtrack_exhausted.push_back(static_cast<int>(i));
  }
  return update;
}

}  // namespace spmtl
