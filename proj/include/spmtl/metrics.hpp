#pragma once

#include <string>
#include <vector>

#include "spmtl/dataset.hpp"
#include "spmtl/types.hpp"

namespace spmtl {

struct TaskEval {
  std::string task_id;
  double rmse = 0.0;
  double nmse = 0.0;
  Index n_test = 0;
};

/// Pooled metrics concatenate all test instances across tasks before
/// averaging; the task-mean variants average the per-task values unweighted.
struct EvalResult {
  double rmse_pooled = 0.0;
  double nmse_pooled = 0.0;
  double rmse_task_mean = 0.0;
  double nmse_task_mean = 0.0;
  std::vector<TaskEval> per_task;
};

/// sqrt(mean((pred - actual)^2)).
double rmse(const Vector& pred, const Vector& actual);

/// mean((pred - actual)^2) / population-variance(actual). Predicting the
/// target mean scores exactly 1. Throws on zero target variance.
double nmse(const Vector& pred, const Vector& actual);

EvalResult evaluate(const std::vector<Vector>& predictions,
                    const MultiTaskDataset& data);

struct TTestResult {
  double t = 0.0;
  bool significant = false;
  // Zero-variance differences with a nonzero mean: the test statistic is
  // unbounded and significance is undecidable.
  bool degenerate = false;
};

/// Two-sided paired t-test on (a - b) with n-1 degrees of freedom at the
/// given confidence level (e.g. 0.95).
TTestResult paired_t_test(const Vector& scores_a, const Vector& scores_b,
                          double level);

/// Inverse CDF of Student's t. Built from a continued-fraction incomplete
/// beta (a rational approximation) inverted by bisection; well below 1e-6
/// error for df <= 1000.
double student_t_quantile(double p, int df);

}  // namespace spmtl
