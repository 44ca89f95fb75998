#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spmtl/dataset.hpp"
#include "spmtl/types.hpp"

namespace spmtl {

/// Per-task squared residuals of the current model.
struct LossMatrix {
  std::vector<Vector> per_task;
};

/// Per-task instance weights, every entry in [0, 1].
struct PaceWeights {
  std::vector<Vector> per_task;

  static PaceWeights ones_like(const MultiTaskDataset& data);
  static PaceWeights zeros_like(const MultiTaskDataset& data);
};

/// Instrumentation for solve_task_weights (test builds assert the solver
/// does exactly one sort plus a single linear scan).
struct SolveTaskWeightsStats {
  int sorts = 0;
  std::size_t candidates_scanned = 0;
};

/// Squared per-instance losses (y - coeffs_i^T basis^T x)^2, computed as one
/// basis*coeffs_i product per task followed by per-instance dot products.
LossMatrix instance_losses(const Matrix& basis, const Matrix& coeffs,
                           const MultiTaskDataset& data);

/// Exact minimizer of the per-task weight subproblem
///   min_{w in [0,1]^n}  (1/n) w . losses - instance_pace ||w||_1
///                       + (task_pace / sqrt(n)) ||w||_2
/// via one ascending sort and a single scan over the ones/interior boundary.
/// Candidates are scored with the exact subproblem objective; the scan keeps
/// the p/q window sums incrementally.
Vector solve_task_weights(const Vector& losses, double instance_pace,
                          double task_pace,
                          SolveTaskWeightsStats* stats = nullptr);

/// Value of the self-paced regularizer
///   -instance_pace * sum_i ||w_i||_1 + task_pace * sum_i ||w_i||_2 / sqrt(n_i).
double regularizer_value(const PaceWeights& weights, double instance_pace,
                         double task_pace);

// Small helpers shared by the trainer and the diagnostics dump.
double weight_change(const PaceWeights& a, const PaceWeights& b);
double min_weight(const PaceWeights& weights);
int active_task_count(const PaceWeights& weights);
double weighted_loss_sum(const PaceWeights& weights, const LossMatrix& losses);

/// Diagnostics CSV `task_id,instance_index,loss,weight`, instances sorted by
/// loss within each task.
void write_weights_csv(const std::string& path, const MultiTaskDataset& data,
                       const LossMatrix& losses, const PaceWeights& weights);

}  // namespace spmtl
