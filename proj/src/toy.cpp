#include "spmtl/toy.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "spmtl/errors.hpp"
#include "spmtl/rng.hpp"

namespace spmtl {

namespace {

void check_config(const ToyConfig& cfg) {
  if (cfg.groups < 1 || cfg.tasks_per_group < 1 || cfg.instances_per_task < 1 ||
      cfg.latent_count < 1 || cfg.dim < 1)
    throw ValidationError("toy config: all counts must be >= 1");
  if (cfg.latent_count != cfg.groups + 1)
    throw ValidationError(
        "toy config: latent_count must equal groups + 1 under the "
        "overlapping-pairs scheme");
  if (cfg.sigma_scale < 0.0)
    throw ValidationError("toy config: sigma_scale must be >= 0");
}

}  // namespace

std::pair<MultiTaskDataset, GroundTruth> generate_toy(const ToyConfig& cfg) {
  check_config(cfg);
  RandomStream rng(cfg.seed);

  const int m = cfg.task_count();

  GroundTruth truth;
  truth.basis.resize(cfg.dim, cfg.latent_count);
  for (int c = 0; c < cfg.latent_count; ++c)
    for (int r = 0; r < cfg.dim; ++r) truth.basis(r, c) = rng.normal();

  truth.coefficients = Matrix::Zero(cfg.latent_count, m);
  truth.group_of_task.resize(m);
  int task = 0;
  for (int g = 0; g < cfg.groups; ++g) {
    for (int t = 0; t < cfg.tasks_per_group; ++t, ++task) {
      truth.coefficients(g, task) = rng.normal();
      truth.coefficients(g + 1, task) = rng.normal();
      truth.group_of_task[task] = g;
    }
  }

  MultiTaskDataset data;
  data.d = cfg.dim;
  data.tasks.reserve(m);
  const int n = cfg.instances_per_task;
  for (int i = 0; i < m; ++i) {
    const double sigma = cfg.sigma_scale * rng.normal();
    const Vector predictor = truth.basis * truth.coefficients.col(i);

    TaskData td;
    td.task_id = "task_" + std::to_string(i);
    td.features.resize(n, cfg.dim);
    td.targets.resize(n);
    Vector theta(n);
    for (int j = 0; j < n; ++j) {
      for (int f = 0; f < cfg.dim; ++f) td.features(j, f) = rng.normal();
      theta[j] = rng.normal();
    }
    // Same matrix-vector kernel as predict(), so an exact model reproduces
    // noise-free targets bit for bit.
    const Vector clean = td.features * predictor;
    td.targets = clean + sigma * theta;

    const double mean = clean.mean();
    const double var = (clean.array() - mean).square().sum() / n;
    if (!(var > 0.0))
      throw ValidationError("toy generation: task " + td.task_id +
                            " has zero noise-free target variance");
    data.tasks.push_back(std::move(td));
  }
  return {std::move(data), std::move(truth)};
}

void save_ground_truth_json(const GroundTruth& truth, const ToyConfig& cfg,
                            const std::string& path) {
  auto matrix_rows = [](const Matrix& mat) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index r = 0; r < mat.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Index c = 0; c < mat.cols(); ++c) row.push_back(mat(r, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };

  nlohmann::json doc;
  doc["U_true"] = matrix_rows(truth.basis);
  doc["V_true"] = matrix_rows(truth.coefficients);
  doc["groups"] = truth.group_of_task;
  doc["seed"] = cfg.seed;

  std::ofstream out(path);
  if (!out) throw IoError("cannot write ground-truth file: " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace spmtl
