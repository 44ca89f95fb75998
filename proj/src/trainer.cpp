#include "spmtl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "spmtl/basis.hpp"
#include "spmtl/errors.hpp"
#include "spmtl/metrics.hpp"

namespace spmtl {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::SPMTL: return "spmtl";
    case TrainMode::SPIWL: return "spiwl";
    case TrainMode::GOMTL: return "gomtl";
  }
  throw ValidationError("unknown train mode");
}

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "spmtl") return TrainMode::SPMTL;
  if (name == "spiwl") return TrainMode::SPIWL;
  if (name == "gomtl") return TrainMode::GOMTL;
  throw ValidationError("unknown mode '" + name +
                        "' (expected spmtl, spiwl, or gomtl)");
}

namespace {

void check_config(const TrainConfig& cfg, const MultiTaskDataset& train) {
  if (cfg.latent_count < 1)
    throw ValidationError("train config: latent_count must be >= 1");
  if (cfg.latent_count > std::min(train.d, train.task_count()))
    throw ValidationError("train config: latent_count exceeds min(d, m)");
  if (!(cfg.basis_reg > 0.0))
    throw ValidationError(
        "train config: basis_reg must be > 0 (the basis system is singular "
        "otherwise)");
  if (cfg.coeff_l1 < 0.0)
    throw ValidationError("train config: coeff_l1 must be >= 0");
  if (cfg.max_iters < 1)
    throw ValidationError("train config: max_iters must be >= 1");
  if (!(cfg.tol > 0.0)) throw ValidationError("train config: tol must be > 0");
  if (!(cfg.pace_growth > 1.0) || !(cfg.pace_decay > 1.0))
    throw ValidationError("train config: pace factors must be > 1");
  if (!(cfg.ridge_strength >= 0.0))
    throw ValidationError("train config: ridge_strength must be >= 0");
  if (!(cfg.pace_percentile > 0.0 && cfg.pace_percentile < 1.0))
    throw ValidationError("train config: pace_percentile must lie in (0, 1)");
  if (cfg.polish_rounds < 0)
    throw ValidationError("train config: polish_rounds must be >= 0");
}

ProxStepConfig prox_config(const TrainConfig& cfg) {
  ProxStepConfig prox;
  prox.initial_step = cfg.prox_initial_step;
  prox.backtrack_shrink = cfg.prox_backtrack_shrink;
  prox.max_backtracks = cfg.prox_max_backtracks;
  prox.l1_penalty = cfg.coeff_l1;
  return prox;
}

}  // namespace

std::pair<Matrix, Matrix> init_model(const MultiTaskDataset& train, int k,
                                     double ridge_strength) {
  validate(train);
  if (k < 1 || k > std::min(train.d, train.task_count()))
    throw ValidationError("init_model: k must lie in [1, min(d, m)]");

  const Index d = train.d;
  const Index m = train.task_count();
  Matrix predictors(d, m);
  for (Index i = 0; i < m; ++i) {
    const TaskData& task = train.tasks[i];
    const double n = static_cast<double>(task.size());
    Matrix normal = task.features.transpose() * task.features;
    normal.diagonal().array() += ridge_strength * n;
    predictors.col(i) =
        normal.ldlt().solve(task.features.transpose() * task.targets);
  }

  Eigen::BDCSVD<Matrix> svd(predictors, Eigen::ComputeThinU);
  const Matrix basis = svd.matrixU().leftCols(k);
  const Matrix coeffs = basis.transpose() * predictors;
  return {basis, coeffs};
}

PaceSchedule init_pace(const LossMatrix& losses, const TrainConfig& cfg,
                       bool* warning, std::string* note) {
  PaceSchedule pace;
  pace.growth = cfg.pace_growth;
  pace.decay = cfg.pace_decay;
  if (warning) *warning = false;

  if (!cfg.pace.automatic) {
    if (cfg.pace.instance_pace0 < 0.0 || cfg.pace.task_pace0 < 0.0)
      throw ValidationError("pace policy: explicit paces must be >= 0");
    pace.instance_pace = cfg.pace.instance_pace0;
    pace.task_pace =
        cfg.mode == TrainMode::SPIWL ? 0.0 : cfg.pace.task_pace0;
    return pace;
  }

  std::vector<double> pooled;
  Index max_n = 1;
  for (const auto& loss : losses.per_task) {
    const double n = static_cast<double>(loss.size());
    max_n = std::max(max_n, loss.size());
    for (Index j = 0; j < loss.size(); ++j) pooled.push_back(loss[j] / n);
  }
  if (pooled.empty()) throw ValidationError("init_pace: no losses");

  // Nearest-rank percentile of the pooled normalized losses.
  std::sort(pooled.begin(), pooled.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(cfg.pace_percentile * static_cast<double>(pooled.size())));
  double lambda0 = pooled[std::max<std::size_t>(rank, 1) - 1];
  if (!(lambda0 > 0.0)) {
    lambda0 = 1e-6;
    if (warning) *warning = true;
    if (note) *note = "degenerate initial losses; instance pace floored at 1e-6";
  }
  pace.instance_pace = lambda0;

  if (cfg.mode == TrainMode::SPIWL) {
    pace.task_pace = 0.0;
    return pace;
  }

  const int m = static_cast<int>(losses.per_task.size());
  const int min_selected = std::max(1, static_cast<int>(std::ceil(0.2 * m)));
  auto selected_tasks = [&](double gamma) {
    int count = 0;
    for (const auto& loss : losses.per_task) {
      const Vector w = solve_task_weights(loss, lambda0, gamma);
      if (w.maxCoeff() > 0.0) ++count;
    }
    return count;
  };

  const double hi_cap = lambda0 * std::sqrt(static_cast<double>(max_n));
  if (selected_tasks(hi_cap) >= min_selected) {
    pace.task_pace = hi_cap;
  } else if (selected_tasks(0.0) < min_selected) {
    pace.task_pace = 0.0;
    if (warning) *warning = true;
    if (note)
      *note = "pace init: fewer than the target task count selected even at "
              "task_pace = 0";
  } else {
    double lo = 0.0, hi = hi_cap;  // lo feasible, hi infeasible
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (selected_tasks(mid) >= min_selected)
        lo = mid;
      else
        hi = mid;
    }
    pace.task_pace = lo;
  }
  return pace;
}

double objective_value(const ModelState& state, const MultiTaskDataset& data,
                       const TrainConfig& cfg, const PaceSchedule& pace) {
  const LossMatrix losses = instance_losses(state.basis, state.coeffs, data);
  double value = weighted_loss_sum(state.weights, losses);
  value += cfg.basis_reg * state.basis.squaredNorm();
  value += cfg.coeff_l1 * state.coeffs.cwiseAbs().sum();
  value += regularizer_value(state.weights, pace.instance_pace, pace.task_pace);
  return value;
}

std::pair<ModelState, FitReport> fit(const MultiTaskDataset& train,
                                     const TrainConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  validate(train);
  check_config(cfg, train);

  ModelState state;
  std::tie(state.basis, state.coeffs) =
      init_model(train, cfg.latent_count, cfg.ridge_strength);
  state.weights = PaceWeights::ones_like(train);

  FitReport report;
  PaceSchedule pace;
  pace.growth = cfg.pace_growth;
  pace.decay = cfg.pace_decay;
  if (cfg.mode != TrainMode::GOMTL) {
    const LossMatrix initial =
        instance_losses(state.basis, state.coeffs, train);
    pace = init_pace(initial, cfg, &report.pace_warning, &report.pace_note);
  }
  report.pace_initial = pace;

  const ProxStepConfig prox = prox_config(cfg);

  PaceWeights prev_weights = state.weights;
  Matrix prev_basis = state.basis;
  Matrix prev_coeffs = state.coeffs;

  report.termination = "max_iterations";
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    IterationRecord rec;
    rec.iter = iter;
    rec.instance_pace = pace.instance_pace;
    rec.task_pace = pace.task_pace;
    rec.objective_start = objective_value(state, train, cfg, pace);

    // Weight block: exact per-task minimizer (GOMTL keeps all-ones).
    if (cfg.mode != TrainMode::GOMTL) {
      const LossMatrix losses =
          instance_losses(state.basis, state.coeffs, train);
      for (Index i = 0; i < train.task_count(); ++i)
        state.weights.per_task[i] = solve_task_weights(
            losses.per_task[i], pace.instance_pace, pace.task_pace);
    }
    rec.objective_after_weights = objective_value(state, train, cfg, pace);

    // Basis block: matrix-free normal equations, warm-started. The weighted
    // Grams are built once per iteration and shared by the polish rounds.
    BasisSystem system(train, state.weights, state.coeffs, cfg.basis_reg);
    auto basis_solve = [&]() {
      try {
        system.set_coeffs(state.coeffs);
        state.basis =
            system.solve(state.basis, cfg.basis_tol, cfg.basis_max_iter);
      } catch (const SolverError& err) {
        throw SolverError("iteration " + std::to_string(iter) + ": " +
                              err.what(),
                          err.residual());
      }
    };
    basis_solve();
    rec.objective_after_basis = objective_value(state, train, cfg, pace);

    // Coefficient block: backtracked proximal steps per task, iterated until
    // the block stabilizes (a single step per iteration leaves the block
    // change far above any practical stopping tolerance).
    const double inner_tol =
        cfg.coeff_inner_tol > 0.0 ? cfg.coeff_inner_tol : cfg.tol * 1e-3;
    auto coeff_solve = [&]() {
      CoeffUpdate update = solve_coefficient_block(
          state.basis, train, state.weights, state.coeffs, prox, inner_tol,
          cfg.coeff_inner_max_steps);
      state.coeffs = std::move(update.coeffs);
      for (const int task : update.backtrack_exhausted)
        if (std::find(rec.backtrack_exhausted.begin(),
                      rec.backtrack_exhausted.end(),
                      task) == rec.backtrack_exhausted.end())
          rec.backtrack_exhausted.push_back(task);
    };
    coeff_solve();

    // Capped extra alternations push the basis/coefficient pair toward its
    // joint fixed point; every sub-step is a descent step.
    const double polish_tol =
        cfg.polish_tol > 0.0 ? cfg.polish_tol : cfg.tol * 0.2;
    for (int round = 0; round < cfg.polish_rounds; ++round) {
      const Matrix basis_before = state.basis;
      const Matrix coeffs_before = state.coeffs;
      basis_solve();
      coeff_solve();
      const double moved = (state.basis - basis_before).norm() +
                           (state.coeffs - coeffs_before).norm();
      if (moved <= polish_tol) break;
    }
    rec.objective_after_coeffs = objective_value(state, train, cfg, pace);

    // Pace update; the instance pace freezes once every weight saturates.
    if (cfg.mode != TrainMode::GOMTL) {
      if (min_weight(state.weights) < 1.0 - 1e-9)
        pace.instance_pace *= pace.growth;
      pace.task_pace /= pace.decay;
    }

    rec.weight_change = weight_change(state.weights, prev_weights);
    rec.basis_change = (state.basis - prev_basis).norm();
    rec.coeff_change = (state.coeffs - prev_coeffs).norm();
    rec.active_tasks = active_task_count(state.weights);
    if (cfg.record_weight_snapshots) rec.weight_snapshot = state.weights.per_task;

    prev_weights = state.weights;
    prev_basis = state.basis;
    prev_coeffs = state.coeffs;

    const bool converged = rec.weight_change <= cfg.tol &&
                           rec.basis_change <= cfg.tol &&
                           rec.coeff_change <= cfg.tol;
    report.iterations.push_back(std::move(rec));
    if (converged) {
      report.termination = "converged";
      break;
    }
  }
  report.pace_final = pace;

  // Final training-set metrics.
  {
    std::vector<Vector> preds;
    preds.reserve(train.tasks.size());
    for (Index i = 0; i < train.task_count(); ++i)
      preds.push_back(predict(state, train.tasks[i].features, i));
    try {
      const EvalResult eval = evaluate(preds, train);
      report.final_train_rmse = eval.rmse_pooled;
      report.final_train_nmse = eval.nmse_pooled;
    } catch (const ValidationError&) {
      report.final_train_rmse = std::numeric_limits<double>::quiet_NaN();
      report.final_train_nmse = std::numeric_limits<double>::quiet_NaN();
    }
  }

  report.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return {std::move(state), std::move(report)};
}

Vector predict(const ModelState& state, const FeatureMatrix& features,
               Index task_index) {
  if (task_index < 0 || task_index >= state.coeffs.cols())
    throw ValidationError("predict: unknown task index " +
                          std::to_string(task_index));
  if (features.cols() != state.basis.rows())
    throw ValidationError("predict: feature width does not match model d");
  const Vector predictor = state.basis * state.coeffs.col(task_index);
  return features * predictor;
}

}  // namespace spmtl
