#include "spmtl/pace.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "spmtl/errors.hpp"

namespace spmtl {

PaceWeights PaceWeights::ones_like(const MultiTaskDataset& data) {
  PaceWeights w;
  w.per_task.reserve(data.tasks.size());
  for (const auto& task : data.tasks)
    w.per_task.push_back(Vector::Ones(task.size()));
  return w;
}

PaceWeights PaceWeights::zeros_like(const MultiTaskDataset& data) {
  PaceWeights w;
  w.per_task.reserve(data.tasks.size());
  for (const auto& task : data.tasks)
    w.per_task.push_back(Vector::Zero(task.size()));
  return w;
}

LossMatrix instance_losses(const Matrix& basis, const Matrix& coeffs,
                           const MultiTaskDataset& data) {
  if (basis.rows() != data.d)
    throw ValidationError("instance_losses: basis rows do not match d");
  if (coeffs.rows() != basis.cols())
    throw ValidationError("instance_losses: coeffs rows do not match basis cols");
  if (coeffs.cols() != data.task_count())
    throw ValidationError("instance_losses: coeffs cols do not match task count");

  LossMatrix losses;
  losses.per_task.reserve(data.tasks.size());
  for (Index i = 0; i < data.task_count(); ++i) {
    const TaskData& task = data.tasks[i];
    const Vector predictor = basis * coeffs.col(i);
    const Vector residual = task.targets - task.features * predictor;
    losses.per_task.push_back(residual.array().square().matrix());
  }
  return losses;
}

Vector solve_task_weights(const Vector& losses, double instance_pace,
                          double task_pace, SolveTaskWeightsStats* stats) {
  if (instance_pace < 0.0 || task_pace < 0.0)
    throw ValidationError("solve_task_weights: pace parameters must be >= 0");
  const Index n = losses.size();
  if (n < 1) throw ValidationError("solve_task_weights: empty loss vector");
  for (Index j = 0; j < n; ++j)
    if (!(losses[j] >= 0.0) || !std::isfinite(losses[j]))
      throw ValidationError("solve_task_weights: losses must be finite and >= 0");

  const double nd = static_cast<double>(n);
  const double lambda = instance_pace;
  const double gamma = task_pace;

  // Ascending stable sort; ties keep original index order.
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return losses[a] < losses[b]; });
  if (stats) ++stats->sorts;

  // Normalized sorted losses a_j = L_(j)/n and their prefix sums
  // (1-based positions).
  Vector a(n + 1);
  Vector prefix(n + 1);
  a[0] = 0.0;
  prefix[0] = 0.0;
  for (Index j = 1; j <= n; ++j) {
    a[j] = losses[order[j - 1]] / nd;
    prefix[j] = prefix[j - 1] + a[j];
  }

  // k1: first sorted position past the exclusion threshold (weight forced
  // to 0), n+1 if none. Exclusion is strict: a loss sitting exactly on
  // lambda * n stays eligible, so a pace initialized from a loss percentile
  // still admits the percentile instance itself.
  Index k1 = n + 1;
  for (Index j = 1; j <= n; ++j) {
    if (losses[order[j - 1]] > lambda * nd) {
      k1 = j;
      break;
    }
  }

  // s_star: last sorted position cheap enough to be forced to weight 1.
  const double ones_threshold = nd * lambda - std::sqrt(nd) * gamma;
  Index s_star = 0;
  for (Index j = n; j >= 1; --j) {
    if (losses[order[j - 1]] <= ones_threshold) {
      s_star = j;
      break;
    }
  }
  s_star = std::min(s_star, k1 - 1);

  // Scan k0 from s_star to k1-1. The open window (k0, k1) carries
  //   p = sum (lambda - a_j)^2,  q = sum (lambda - a_j),
  // maintained by removing the term that leaves the window at each step.
  double p = 0.0, q = 0.0;
  for (Index j = s_star + 1; j < k1; ++j) {
    const double t = lambda - a[j];
    p += t * t;
    q += t;
  }

  double best_obj = std::numeric_limits<double>::infinity();
  Index best_k0 = -1;
  double best_c = 0.0;

  const double gamma_sq_over_n = gamma * gamma / nd;
  for (Index k0 = s_star; k0 < k1; ++k0) {
    if (k0 > s_star) {
      const double t = lambda - a[k0];
      p -= t * t;
      q -= t;
    }
    const bool empty_window = (k0 + 1 >= k1);
    if (empty_window) {
      p = 0.0;  // clears incremental rounding residue
      q = 0.0;
    } else if (p < 0.0) {
      p = 0.0;
    }
    if (stats) ++stats->candidates_scanned;

    // Interior slope c: interior weights are c * (lambda - a_j).
    double c;
    if (gamma_sq_over_n == p) {
      c = (!empty_window && gamma_sq_over_n < q)
              ? 1.0 / (lambda - a[k0 + 1])
              : 0.0;
    } else {
      const double denom = gamma * gamma - nd * p;
      if (k0 == 0)
        c = 0.0;
      else if (denom > 0.0)
        c = std::sqrt(static_cast<double>(k0) * nd / denom);
      else
        continue;  // no finite interior slope for this boundary
    }

    // Candidate must stay inside the box: the largest interior weight sits
    // at the smallest windowed loss.
    if (!empty_window && c * (lambda - a[k0 + 1]) > 1.0 + 1e-12) continue;

    // Exact subproblem objective of this candidate.
    const double k0d = static_cast<double>(k0);
    const double obj = prefix[k0] - lambda * k0d - c * p +
                       gamma / std::sqrt(nd) * std::sqrt(k0d + c * c * p);
    if (obj < best_obj) {
      best_obj = obj;
      best_k0 = k0;
      best_c = c;
    }
  }
  assert(best_k0 >= 0);  // k0 = k1-1 is always admissible

  Vector weights(n);
  for (Index j = 1; j <= n; ++j) {
    double w;
    if (j <= best_k0)
      w = 1.0;
    else if (j >= k1)
      w = 0.0;
    else
      w = best_c * (lambda - a[j]);
    const double clamped = std::min(1.0, std::max(0.0, w));
    assert(std::abs(clamped - w) <= 1e-12);
    weights[order[j - 1]] = clamped;
  }
  return weights;
}

double regularizer_value(const PaceWeights& weights, double instance_pace,
                         double task_pace) {
  double value = 0.0;
  for (const auto& w : weights.per_task) {
    const double n = static_cast<double>(w.size());
    value += -instance_pace * w.lpNorm<1>() + task_pace * w.norm() / std::sqrt(n);
  }
  return value;
}

double weight_change(const PaceWeights& a, const PaceWeights& b) {
  if (a.per_task.size() != b.per_task.size())
    throw ValidationError("weight_change: task counts differ");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.per_task.size(); ++i)
    sq += (a.per_task[i] - b.per_task[i]).squaredNorm();
  return std::sqrt(sq);
}

double min_weight(const PaceWeights& weights) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& w : weights.per_task)
    if (w.size() > 0) lo = std::min(lo, w.minCoeff());
  return lo;
}

int active_task_count(const PaceWeights& weights) {
  int count = 0;
  for (const auto& w : weights.per_task)
    if (w.size() > 0 && w.maxCoeff() > 0.0) ++count;
  return count;
}

double weighted_loss_sum(const PaceWeights& weights, const LossMatrix& losses) {
  if (weights.per_task.size() != losses.per_task.size())
    throw ValidationError("weighted_loss_sum: shapes disagree");
  double value = 0.0;
  for (std::size_t i = 0; i < weights.per_task.size(); ++i) {
    const double n = static_cast<double>(weights.per_task[i].size());
    value += weights.per_task[i].dot(losses.per_task[i]) / n;
  }
  return value;
}

void write_weights_csv(const std::string& path, const MultiTaskDataset& data,
                       const LossMatrix& losses, const PaceWeights& weights) {
  if (losses.per_task.size() != data.tasks.size() ||
      weights.per_task.size() != data.tasks.size())
    throw ValidationError("write_weights_csv: shapes disagree");

  std::ofstream out(path);
  if (!out) throw IoError("cannot write weights file: " + path);
  out << "task_id,instance_index,loss,weight\n";
  char buf[80];
  for (std::size_t i = 0; i < data.tasks.size(); ++i) {
    const Vector& loss = losses.per_task[i];
    const Vector& w = weights.per_task[i];
    std::vector<Index> order(loss.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index x, Index y) { return loss[x] < loss[y]; });
    for (const Index j : order) {
      std::snprintf(buf, sizeof(buf), "%s,%lld,%.17g,%.17g\n",
                    data.tasks[i].task_id.c_str(), static_cast<long long>(j),
                    loss[j], w[j]);
      out << buf;
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace spmtl
