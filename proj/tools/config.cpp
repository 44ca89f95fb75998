#include "config.hpp"

#include <algorithm>
#include <fstream>

#include "spmtl/errors.hpp"

namespace spmtl::cli {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& err) {
    throw ValidationError("config file " + path + ": invalid JSON (" +
                          err.what() + ")");
  }
}

void reject_unknown_keys(const json& obj,
                         const std::vector<std::string>& allowed,
                         const std::string& context) {
  if (!obj.is_object())
    throw ValidationError("config: " + context + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ValidationError("config: unknown key '" + key + "' in " + context);
  }
}

ToyConfig toy_config_from_json(const json& obj) {
  reject_unknown_keys(obj,
                      {"groups", "tasks_per_group", "instances_per_task",
                       "latent_count", "dim", "sigma_scale", "seed"},
                      "toy config");
  ToyConfig cfg;
  cfg.groups = get_or(obj, "groups", cfg.groups);
  cfg.tasks_per_group = get_or(obj, "tasks_per_group", cfg.tasks_per_group);
  cfg.instances_per_task =
      get_or(obj, "instances_per_task", cfg.instances_per_task);
  cfg.latent_count = get_or(obj, "latent_count", cfg.groups + 1);
  cfg.dim = get_or(obj, "dim", cfg.dim);
  cfg.sigma_scale = get_or(obj, "sigma_scale", cfg.sigma_scale);
  cfg.seed = get_or(obj, "seed", cfg.seed);
  return cfg;
}

TrainConfig train_config_from_json(const json& obj) {
  reject_unknown_keys(
      obj,
      {"k", "alpha", "beta", "max_iters", "tol", "mu1", "mu2", "mode",
       "lambda0", "gamma0", "ridge", "seed", "record_weights",
       "pace_percentile", "polish_rounds"},
      "train config");
  TrainConfig cfg;
  cfg.latent_count = get_required<int>(obj, "k", "train config");
  cfg.basis_reg = get_or(obj, "alpha", cfg.basis_reg);
  cfg.coeff_l1 = get_or(obj, "beta", cfg.coeff_l1);
  cfg.max_iters = get_or(obj, "max_iters", cfg.max_iters);
  cfg.tol = get_or(obj, "tol", cfg.tol);
  cfg.pace_growth = get_or(obj, "mu1", cfg.pace_growth);
  cfg.pace_decay = get_or(obj, "mu2", cfg.pace_decay);
  cfg.mode = train_mode_from_string(
      get_or<std::string>(obj, "mode", to_string(cfg.mode)));
  if (obj.contains("lambda0")) {
    cfg.pace.automatic = false;
    cfg.pace.instance_pace0 = get_or(obj, "lambda0", 0.0);
    cfg.pace.task_pace0 = get_or(obj, "gamma0", 0.0);
  } else if (obj.contains("gamma0")) {
    throw ValidationError("config: gamma0 requires lambda0");
  }
  cfg.ridge_strength = get_or(obj, "ridge", cfg.ridge_strength);
  cfg.pace_percentile = get_or(obj, "pace_percentile", cfg.pace_percentile);
  cfg.polish_rounds = get_or(obj, "polish_rounds", cfg.polish_rounds);
  cfg.seed = get_or(obj, "seed", cfg.seed);
  cfg.record_weight_snapshots =
      get_or(obj, "record_weights", cfg.record_weight_snapshots);
  return cfg;
}

SplitSpec split_spec_from_json(const json& obj) {
  reject_unknown_keys(obj, {"train_ratio", "seed"}, "split config");
  SplitSpec spec;
  spec.train_ratio = get_required<double>(obj, "train_ratio", "split config");
  spec.seed = get_or(obj, "seed", spec.seed);
  return spec;
}

}  // namespace spmtl::cli
