#include "spmtl/basis.hpp"

#include <cmath>
#include <string>

#include "spmtl/errors.hpp"

namespace spmtl {

BasisSystem::BasisSystem(const MultiTaskDataset& data, const PaceWeights& weights,
                         const Matrix& coeffs, double reg)
    : reg_(reg) {
  if (reg < 0.0) throw ValidationError("basis system: reg must be >= 0");
  if (data.tasks.empty())
    throw ValidationError("basis system: dataset has no tasks");
  if (coeffs.cols() != data.task_count())
    throw ValidationError("basis system: coeffs cols do not match task count");
  if (weights.per_task.size() != data.tasks.size())
    throw ValidationError("basis system: weights do not match task count");

  gram_.reserve(data.tasks.size());
  moment_.reserve(data.tasks.size());
  for (Index i = 0; i < data.task_count(); ++i) {
    const TaskData& task = data.tasks[i];
    const Vector& w = weights.per_task[i];
    if (w.size() != task.size())
      throw ValidationError("basis system: weight length mismatch for task " +
                            task.task_id);
    const double inv_n = 1.0 / static_cast<double>(task.size());
    gram_.push_back(task.features.transpose() * w.asDiagonal() * task.features *
                    inv_n);
    moment_.push_back(task.features.transpose() *
                      (w.array() * task.targets.array()).matrix() * inv_n);
  }
  set_coeffs(coeffs);
}

void BasisSystem::set_coeffs(const Matrix& coeffs) {
  if (coeffs.cols() != static_cast<Index>(gram_.size()))
    throw ValidationError("basis system: coeffs cols do not match task count");
  coeffs_ = coeffs;
  rhs_ = Matrix::Zero(gram_.front().rows(), coeffs.rows());
  for (Index i = 0; i < coeffs.cols(); ++i)
    rhs_.noalias() += moment_[i] * coeffs.col(i).transpose();
}

Matrix BasisSystem::apply(const Matrix& basis) const {
  if (basis.rows() != rhs_.rows() || basis.cols() != rhs_.cols())
    throw ValidationError("basis system: apply shape mismatch");
  Matrix out = reg_ * basis;
  for (Index i = 0; i < coeffs_.cols(); ++i) {
    const Vector t = basis * coeffs_.col(i);
    const Vector s = gram_[i] * t;
    out.noalias() += s * coeffs_.col(i).transpose();
  }
  return out;
}

Matrix BasisSystem::solve(const Matrix& warm, double tol, int max_iter) const {
  if (reg_ <= 0.0)
    throw ValidationError("basis solve: reg must be > 0 (the system is only "
                          "positive definite with a positive regularizer)");
  const Index d = rhs_.rows();
  const Index k = rhs_.cols();
  if (max_iter <= 0) max_iter = static_cast<int>(10 * d * k);

  const double b_norm = rhs_.norm();
  if (b_norm == 0.0) return Matrix::Zero(d, k);
  const double target = tol * b_norm;

  Matrix x = (warm.rows() == d && warm.cols() == k) ? warm : Matrix::Zero(d, k);
  Matrix r = rhs_ - apply(x);
  int iters_left = max_iter;
  // Outer restarts guard against drift of the recursive CG residual.
  for (int restart = 0; restart < 4 && iters_left > 0; ++restart) {
    double rs = r.squaredNorm();
    if (std::sqrt(rs) <= target) break;
    Matrix p = r;
    while (iters_left > 0) {
      --iters_left;
      const Matrix q = apply(p);
      const double pq = (p.array() * q.array()).sum();
      if (pq <= 0.0) break;  // numerically exhausted search direction
      const double alpha = rs / pq;
      x.noalias() += alpha * p;
      r.noalias() -= alpha * q;
      const double rs_new = r.squaredNorm();
      if (std::sqrt(rs_new) <= target) break;
      p = r + (rs_new / rs) * p;
      rs = rs_new;
    }
    r = rhs_ - apply(x);  // true residual
    if (r.norm() <= target) return x;
  }
  const double residual = (rhs_ - apply(x)).norm();
  if (residual <= target) return x;
  throw SolverError("basis solve: no convergence within " +
                        std::to_string(max_iter) + " iterations (residual " +
                        std::to_string(residual) + ", target " +
                        std::to_string(target) + ")",
                    residual);
}

Matrix apply_system(const MultiTaskDataset& data, const PaceWeights& weights,
                    const Matrix& coeffs, double reg, const Matrix& basis) {
  return BasisSystem(data, weights, coeffs, reg).apply(basis);
}

Matrix solve_basis(const MultiTaskDataset& data, const PaceWeights& weights,
                   const Matrix& coeffs, double reg, double tol, int max_iter,
                   const Matrix* warm) {
  const BasisSystem system(data, weights, coeffs, reg);
  const Matrix start =
      warm ? *warm : Matrix::Zero(data.d, coeffs.rows());
  return system.solve(start, tol, max_iter);
}

}  // namespace spmtl
