#include "spmtl/metrics.hpp"

#include <cmath>
#include <limits>

#include "spmtl/errors.hpp"

namespace spmtl {

namespace {

double log_gamma_fn(double x) {
  // Lanczos, g = 7, n = 9.
  static const double coeff[9] = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // Reflection; not hit by the t-distribution use below but kept complete.
    return std::log(M_PI / std::sin(M_PI * x)) - log_gamma_fn(1.0 - x);
  }
  x -= 1.0;
  double a = coeff[0];
  const double t = x + 7.5;
  for (int i = 1; i < 9; ++i) a += coeff[i] / (x + i);
  return 0.5 * std::log(2.0 * M_PI) + (x + 0.5) * std::log(t) - t + std::log(a);
}

// Continued fraction for the regularized incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return h;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = log_gamma_fn(a + b) - log_gamma_fn(a) -
                          log_gamma_fn(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, int df) {
  const double nu = static_cast<double>(df);
  const double x = nu / (nu + t * t);
  const double half_tail = 0.5 * incomplete_beta(0.5 * nu, 0.5, x);
  return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

}  // namespace

double student_t_quantile(double p, int df) {
  if (df < 1) throw ValidationError("student_t_quantile: df must be >= 1");
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("student_t_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, df);

  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, df) < p) {
    hi *= 2.0;
    if (hi > 1e12)
      throw SolverError("student_t_quantile: bracket expansion failed");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double rmse(const Vector& pred, const Vector& actual) {
  if (pred.size() != actual.size())
    throw ValidationError("rmse: length mismatch");
  if (pred.size() < 1) throw ValidationError("rmse: empty input");
  return std::sqrt((pred - actual).squaredNorm() /
                   static_cast<double>(pred.size()));
}

double nmse(const Vector& pred, const Vector& actual) {
  if (pred.size() != actual.size())
    throw ValidationError("nmse: length mismatch");
  if (pred.size() < 1) throw ValidationError("nmse: empty input");
  const double n = static_cast<double>(actual.size());
  const double mean = actual.mean();
  const double variance = (actual.array() - mean).square().sum() / n;
  if (!(variance > 0.0))
    throw ValidationError("nmse: target variance is zero");
  const double mse = (pred - actual).squaredNorm() / n;
  return mse / variance;
}

EvalResult evaluate(const std::vector<Vector>& predictions,
                    const MultiTaskDataset& data) {
  if (predictions.size() != data.tasks.size())
    throw ValidationError("evaluate: prediction count does not match tasks");

  EvalResult result;
  Index n_total = 0;
  for (const auto& task : data.tasks) n_total += task.size();
  Vector pooled_pred(n_total), pooled_actual(n_total);

  Index offset = 0;
  for (std::size_t i = 0; i < data.tasks.size(); ++i) {
    const TaskData& task = data.tasks[i];
    const Vector& pred = predictions[i];
    if (pred.size() != task.size())
      throw ValidationError("evaluate: prediction length mismatch for task " +
                            task.task_id);
    TaskEval te;
    te.task_id = task.task_id;
    te.n_test = task.size();
    te.rmse = rmse(pred, task.targets);
    te.nmse = nmse(pred, task.targets);
    result.per_task.push_back(te);

    pooled_pred.segment(offset, task.size()) = pred;
    pooled_actual.segment(offset, task.size()) = task.targets;
    offset += task.size();
  }

  result.rmse_pooled = rmse(pooled_pred, pooled_actual);
  result.nmse_pooled = nmse(pooled_pred, pooled_actual);
  for (const auto& te : result.per_task) {
    result.rmse_task_mean += te.rmse;
    result.nmse_task_mean += te.nmse;
  }
  result.rmse_task_mean /= static_cast<double>(result.per_task.size());
  result.nmse_task_mean /= static_cast<double>(result.per_task.size());
  return result;
}

TTestResult paired_t_test(const Vector& scores_a, const Vector& scores_b,
                          double level) {
  if (scores_a.size() != scores_b.size())
    throw ValidationError("paired_t_test: length mismatch");
  const Index n = scores_a.size();
  if (n < 2) throw ValidationError("paired_t_test: need at least 2 pairs");
  if (!(level > 0.0 && level < 1.0))
    throw ValidationError("paired_t_test: level must lie in (0, 1)");

  const Vector diff = scores_a - scores_b;
  const double mean = diff.mean();
  const double var =
      (diff.array() - mean).square().sum() / static_cast<double>(n - 1);
  const double sd = std::sqrt(var);

  TTestResult result;
  if (sd == 0.0) {
    if (mean == 0.0) return result;  // t = 0, not significant
    result.t = mean > 0.0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
    result.degenerate = true;
    return result;
  }
  result.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const double critical =
      student_t_quantile(1.0 - (1.0 - level) / 2.0, static_cast<int>(n) - 1);
  result.significant = std::abs(result.t) > critical;
  return result;
}

}  // namespace spmtl
