#include "spmtl/model_io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "spmtl/errors.hpp"

namespace spmtl {

namespace {

using nlohmann::json;

json matrix_row_major(const Matrix& mat) {
  json values = json::array();
  for (Index r = 0; r < mat.rows(); ++r)
    for (Index c = 0; c < mat.cols(); ++c) values.push_back(mat(r, c));
  return values;
}

Matrix matrix_from_row_major(const json& values, Index rows, Index cols,
                             const std::string& name) {
  if (!values.is_array() ||
      values.size() != static_cast<std::size_t>(rows * cols))
    throw ValidationError("model file: '" + name + "' must hold " +
                          std::to_string(rows * cols) + " values");
  Matrix mat(rows, cols);
  std::size_t idx = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) mat(r, c) = values[idx++].get<double>();
  return mat;
}

json config_to_json(const TrainConfig& cfg) {
  json j;
  j["k"] = cfg.latent_count;
  j["alpha"] = cfg.basis_reg;
  j["beta"] = cfg.coeff_l1;
  j["max_iters"] = cfg.max_iters;
  j["tol"] = cfg.tol;
  j["mu1"] = cfg.pace_growth;
  j["mu2"] = cfg.pace_decay;
  j["mode"] = to_string(cfg.mode);
  j["pace_auto"] = cfg.pace.automatic;
  j["lambda0"] = cfg.pace.instance_pace0;
  j["gamma0"] = cfg.pace.task_pace0;
  j["ridge"] = cfg.ridge_strength;
  j["pace_percentile"] = cfg.pace_percentile;
  j["polish_rounds"] = cfg.polish_rounds;
  j["seed"] = cfg.seed;
  return j;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.latent_count = j.at("k").get<int>();
  cfg.basis_reg = j.at("alpha").get<double>();
  cfg.coeff_l1 = j.at("beta").get<double>();
  cfg.max_iters = j.at("max_iters").get<int>();
  cfg.tol = j.at("tol").get<double>();
  cfg.pace_growth = j.at("mu1").get<double>();
  cfg.pace_decay = j.at("mu2").get<double>();
  cfg.mode = train_mode_from_string(j.at("mode").get<std::string>());
  cfg.pace.automatic = j.at("pace_auto").get<bool>();
  cfg.pace.instance_pace0 = j.at("lambda0").get<double>();
  cfg.pace.task_pace0 = j.at("gamma0").get<double>();
  cfg.ridge_strength = j.at("ridge").get<double>();
  cfg.pace_percentile = j.at("pace_percentile").get<double>();
  cfg.polish_rounds = j.at("polish_rounds").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

Index SavedModel::task_index(const std::string& task_id) const {
  for (std::size_t i = 0; i < task_ids.size(); ++i)
    if (task_ids[i] == task_id) return static_cast<Index>(i);
  return -1;
}

void save_model_json(const SavedModel& model, const std::string& path) {
  json doc;
  doc["format_version"] = model.format_version;
  doc["d"] = model.d;
  doc["k"] = model.k;
  doc["m"] = model.m;
  doc["task_ids"] = model.task_ids;
  doc["U"] = matrix_row_major(model.state.basis);
  doc["V"] = matrix_row_major(model.state.coeffs);
  json final_w = json::array();
  for (const auto& w : model.state.weights.per_task) {
    json task_w = json::array();
    for (Index j = 0; j < w.size(); ++j) task_w.push_back(w[j]);
    final_w.push_back(std::move(task_w));
  }
  doc["final_w"] = std::move(final_w);
  doc["config"] = config_to_json(model.config);
  doc["pace_final"] = {{"lambda", model.pace_final.instance_pace},
                       {"gamma", model.pace_final.task_pace},
                       {"mu1", model.pace_final.growth},
                       {"mu2", model.pace_final.decay}};

  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file: " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

SavedModel load_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& err) {
    throw ValidationError("model file: invalid JSON (" +
                          std::string(err.what()) + ")");
  }

  SavedModel model;
  try {
    model.format_version = doc.at("format_version").get<int>();
    if (model.format_version != 1)
      throw ValidationError("model file: unsupported format_version");
    model.d = doc.at("d").get<Index>();
    model.k = doc.at("k").get<Index>();
    model.m = doc.at("m").get<Index>();
    if (model.d < 1 || model.k < 1 || model.m < 1)
      throw ValidationError("model file: d, k, m must be >= 1");
    model.task_ids = doc.at("task_ids").get<std::vector<std::string>>();
    if (model.task_ids.size() != static_cast<std::size_t>(model.m))
      throw ValidationError("model file: task_ids length does not match m");
    model.state.basis =
        matrix_from_row_major(doc.at("U"), model.d, model.k, "U");
    model.state.coeffs =
        matrix_from_row_major(doc.at("V"), model.k, model.m, "V");
    const json& final_w = doc.at("final_w");
    if (!final_w.is_array() ||
        final_w.size() != static_cast<std::size_t>(model.m))
      throw ValidationError("model file: final_w must hold m weight vectors");
    for (const auto& task_w : final_w) {
      Vector w(task_w.size());
      for (std::size_t j = 0; j < task_w.size(); ++j)
        w[static_cast<Index>(j)] = task_w[j].get<double>();
      model.state.weights.per_task.push_back(std::move(w));
    }
    model.config = config_from_json(doc.at("config"));
    const json& pace = doc.at("pace_final");
    model.pace_final.instance_pace = pace.at("lambda").get<double>();
    model.pace_final.task_pace = pace.at("gamma").get<double>();
    model.pace_final.growth = pace.at("mu1").get<double>();
    model.pace_final.decay = pace.at("mu2").get<double>();
  } catch (const json::exception& err) {
    throw ValidationError("model file: " + std::string(err.what()));
  }
  return model;
}

}  // namespace spmtl
