#pragma once

#include <vector>

#include "spmtl/dataset.hpp"
#include "spmtl/pace.hpp"
#include "spmtl/types.hpp"

namespace spmtl {

/// The basis-update normal equations as an implicit SPD operator on d x k
/// matrices:
///   A(U) = sum_i (1/n_i) X_i^T diag(w_i) X_i U v_i v_i^T + reg * U
///   B    = sum_i (1/n_i) X_i^T (w_i .* y_i) v_i^T
/// The per-task weighted Gram matrices are built once and reused across all
/// solver iterations; the dk x dk matrix is never formed.
class BasisSystem {
 public:
  BasisSystem(const MultiTaskDataset& data, const PaceWeights& weights,
              const Matrix& coeffs, double reg);

  Matrix apply(const Matrix& basis) const;
  const Matrix& rhs() const { return rhs_; }
  double reg() const { return reg_; }

  /// Swaps in new coefficients, reusing the cached weighted Grams (valid
  /// while the weights stay fixed).
  void set_coeffs(const Matrix& coeffs);

  /// Conjugate gradients in the Frobenius inner product, warm-started from
  /// `warm`. Returns U with ||A(U) - B||_F <= tol * ||B||_F (verified on the
  /// true residual); throws SolverError carrying the final residual if the
  /// iteration cap is exhausted. max_iter <= 0 selects 10 * d * k.
  Matrix solve(const Matrix& warm, double tol, int max_iter) const;

 private:
  std::vector<Matrix> gram_;   // (1/n_i) X_i^T diag(w_i) X_i
  std::vector<Vector> moment_;  // (1/n_i) X_i^T (w_i .* y_i)
  Matrix coeffs_;
  Matrix rhs_;
  double reg_;
};

/// One-shot wrappers over BasisSystem (tests and small callers).
Matrix apply_system(const MultiTaskDataset& data, const PaceWeights& weights,
                    const Matrix& coeffs, double reg, const Matrix& basis);
Matrix solve_basis(const MultiTaskDataset& data, const PaceWeights& weights,
                   const Matrix& coeffs, double reg, double tol = 1e-8,
                   int max_iter = 0, const Matrix* warm = nullptr);

}  // namespace spmtl
