#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spmtl/dataset.hpp"
#include "spmtl/types.hpp"

namespace spmtl {

/// Synthetic benchmark: `groups` groups of tasks, each task a sparse
/// combination of two adjacent latent basis columns, with per-task
/// heteroscedastic noise.
struct ToyConfig {
  int groups = 3;
  int tasks_per_group = 10;
  int instances_per_task = 100;
  int latent_count = 4;  // must equal groups + 1 (overlapping-pairs scheme)
  int dim = 20;
  double sigma_scale = 5.0;  // std. dev. of the per-task noise level sigma_i
  std::uint64_t seed = 0;

  int task_count() const { return groups * tasks_per_group; }
};

struct GroundTruth {
  Matrix basis;         // dim x latent_count
  Matrix coefficients;  // latent_count x task_count; column i supports rows
                        // {g, g+1} for task i's group g
  std::vector<int> group_of_task;
};

/// Generates the benchmark from a single seeded stream with a fixed draw
/// order: basis entries column by column, then coefficients group by group
/// (two per task), then per task sigma_i followed by, per instance, the
/// feature vector and the noise draw. Targets are
///   y = coeffs_i^T basis^T x + sigma_i * theta,   sigma_i = sigma_scale * N(0,1).
std::pair<MultiTaskDataset, GroundTruth> generate_toy(const ToyConfig& cfg);

/// Writes {U_true, V_true, groups, seed} as JSON (matrices row-major nested).
void save_ground_truth_json(const GroundTruth& truth, const ToyConfig& cfg,
                            const std::string& path);

}  // namespace spmtl
