#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spmtl/coeff.hpp"
#include "spmtl/dataset.hpp"
#include "spmtl/pace.hpp"
#include "spmtl/types.hpp"

namespace spmtl {

/// SPMTL: pace over instances and tasks. SPIWL: instance pacing only
/// (task_pace pinned to 0). GOMTL: all weights fixed to 1, no pacing.
enum class TrainMode { SPMTL, SPIWL, GOMTL };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

/// Instance pace grows by `growth` and task pace shrinks by `decay` each
/// iteration; both factors must exceed 1.
struct PaceSchedule {
  double instance_pace = 0.0;  // lambda
  double task_pace = 0.0;      // gamma
  double growth = 1.2;         // mu1
  double decay = 1.2;          // mu2
};

/// Automatic policy: instance pace from a percentile of the pooled
/// normalized initial losses; task pace bisected over [0, lambda0*sqrt(max
/// n_i)] as the largest value keeping at least 20% of tasks selected.
/// Explicit policy passes the given values through.
struct PacePolicy {
  bool automatic = true;
  double instance_pace0 = 0.0;
  double task_pace0 = 0.0;
};

struct TrainConfig {
  int latent_count = 4;         // k
  double basis_reg = 100.0;     // Frobenius penalty on the basis
  double coeff_l1 = 2.5;        // l1 penalty on the coefficients
  int max_iters = 50;
  double tol = 1e-4;            // applied to all three block-change norms
  double pace_growth = 1.2;     // mu1
  double pace_decay = 1.2;      // mu2
  TrainMode mode = TrainMode::SPMTL;
  PacePolicy pace;
  double ridge_strength = 1.0;  // initialization ridge
  double basis_tol = 1e-8;
  int basis_max_iter = 0;       // 0 selects 10 * d * k
  double prox_initial_step = 1.0;
  double prox_backtrack_shrink = 0.5;
  int prox_max_backtracks = 50;
  // The coefficient block iterates the backtracked prox step until the
  // per-task change drops below coeff_inner_tol (0 selects tol * 1e-3).
  double coeff_inner_tol = 0.0;
  int coeff_inner_max_steps = 20000;
  // Pooled-loss percentile that seeds the automatic instance pace.
  double pace_percentile = 0.95;
  // Extra basis/coefficient alternations per iteration. The pair behaves as
  // one block; without the polish its fixed point is approached too slowly
  // for the stopping test to ever fire.
  int polish_rounds = 10;
  double polish_tol = 0.0;  // 0 selects tol * 0.2
  std::uint64_t seed = 0;       // part of the config identity; training itself
                                // is deterministic
  bool record_weight_snapshots = true;
};

struct ModelState {
  Matrix basis;   // d x k
  Matrix coeffs;  // k x m
  PaceWeights weights;
};

struct IterationRecord {
  int iter = 0;  // 1-based
  double instance_pace = 0.0;
  double task_pace = 0.0;
  double objective_start = 0.0;
  double objective_after_weights = 0.0;
  double objective_after_basis = 0.0;
  double objective_after_coeffs = 0.0;
  double weight_change = 0.0;
  double basis_change = 0.0;
  double coeff_change = 0.0;
  int active_tasks = 0;
  std::vector<int> backtrack_exhausted;
  std::vector<Vector> weight_snapshot;  // empty when snapshots are disabled
};

struct FitReport {
  std::vector<IterationRecord> iterations;
  std::string termination;  // "converged" or "max_iterations"
  double wall_time_sec = 0.0;
  PaceSchedule pace_initial;
  PaceSchedule pace_final;
  bool pace_warning = false;
  std::string pace_note;
  double final_train_rmse = 0.0;
  double final_train_nmse = 0.0;
};

/// Ridge-regression predictors per task, then a truncated SVD:
///   p_i = (X_i^T X_i + ridge * n_i * I)^{-1} X_i^T y_i,
///   basis = top-k left singular vectors of [p_1 ... p_m],
///   coeffs = basis^T P (the pseudoinverse of an orthonormal basis).
std::pair<Matrix, Matrix> init_model(const MultiTaskDataset& train, int k,
                                     double ridge_strength);

PaceSchedule init_pace(const LossMatrix& losses, const TrainConfig& cfg,
                       bool* warning = nullptr, std::string* note = nullptr);

/// Full objective at the given state and pace:
///   sum_i (1/n_i) w_i . losses_i + basis_reg ||U||_F^2 + coeff_l1 ||V||_1
///   - instance_pace sum_i ||w_i||_1 + task_pace sum_i ||w_i||_2 / sqrt(n_i).
double objective_value(const ModelState& state, const MultiTaskDataset& data,
                       const TrainConfig& cfg, const PaceSchedule& pace);

std::pair<ModelState, FitReport> fit(const MultiTaskDataset& train,
                                     const TrainConfig& cfg);

Vector predict(const ModelState& state, const FeatureMatrix& features,
               Index task_index);

}  // namespace spmtl
