#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "config.hpp"
#include "spmtl/errors.hpp"
#include "spmtl/metrics.hpp"
#include "spmtl/model_io.hpp"
#include "spmtl/pace.hpp"
#include "spmtl/toy.hpp"
#include "spmtl/trainer.hpp"

namespace spmtl::cli {

namespace {

std::string ensure_out_dir(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec && !std::filesystem::is_directory(out))
    throw IoError("cannot create output directory: " + out);
  return out;
}

void write_json(const json& doc, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw IoError("cannot write file: " + path);
  file << doc.dump(2) << '\n';
  if (!file) throw IoError("write failed: " + path);
}

json report_to_json(const FitReport& report) {
  json doc;
  doc["termination"] = report.termination;
  doc["wall_time_sec"] = report.wall_time_sec;
  doc["pace_initial"] = {{"lambda", report.pace_initial.instance_pace},
                         {"gamma", report.pace_initial.task_pace}};
  doc["pace_final"] = {{"lambda", report.pace_final.instance_pace},
                       {"gamma", report.pace_final.task_pace}};
  doc["pace_warning"] = report.pace_warning;
  doc["pace_note"] = report.pace_note;
  doc["final_train_rmse"] = report.final_train_rmse;
  doc["final_train_nmse"] = report.final_train_nmse;
  json iterations = json::array();
  for (const auto& rec : report.iterations) {
    json it;
    it["iter"] = rec.iter;
    it["lambda"] = rec.instance_pace;
    it["gamma"] = rec.task_pace;
    it["objective_start"] = rec.objective_start;
    it["objective_after_w"] = rec.objective_after_weights;
    it["objective_after_u"] = rec.objective_after_basis;
    it["objective_after_v"] = rec.objective_after_coeffs;
    it["dw"] = rec.weight_change;
    it["dU"] = rec.basis_change;
    it["dV"] = rec.coeff_change;
    it["active_tasks"] = rec.active_tasks;
    it["backtrack_exhausted"] = rec.backtrack_exhausted;
    if (!rec.weight_snapshot.empty()) {
      json snapshot = json::array();
      for (const auto& w : rec.weight_snapshot) {
        json task_w = json::array();
        for (Index j = 0; j < w.size(); ++j) task_w.push_back(w[j]);
        snapshot.push_back(std::move(task_w));
      }
      it["weights"] = std::move(snapshot);
    }
    iterations.push_back(std::move(it));
  }
  doc["iterations"] = std::move(iterations);
  return doc;
}

json eval_to_json(const EvalResult& eval) {
  json doc;
  doc["rmse"] = eval.rmse_pooled;
  doc["nmse"] = eval.nmse_pooled;
  doc["rmse_task_mean"] = eval.rmse_task_mean;
  doc["nmse_task_mean"] = eval.nmse_task_mean;
  json per_task = json::array();
  for (const auto& te : eval.per_task)
    per_task.push_back({{"task_id", te.task_id},
                        {"rmse", te.rmse},
                        {"nmse", te.nmse},
                        {"n_test", te.n_test}});
  doc["per_task"] = std::move(per_task);
  return doc;
}

/// Dataset rows matched to model columns by task id.
std::vector<Index> map_tasks(const SavedModel& model,
                             const MultiTaskDataset& data) {
  if (data.d != model.d)
    throw ValidationError("dataset width d=" + std::to_string(data.d) +
                          " does not match model d=" + std::to_string(model.d));
  std::vector<Index> mapping;
  for (const auto& task : data.tasks) {
    const Index idx = model.task_index(task.task_id);
    if (idx < 0)
      throw ValidationError("dataset task '" + task.task_id +
                            "' is unknown to the model");
    mapping.push_back(idx);
  }
  return mapping;
}

}  // namespace

void run_gen_toy(const std::string& config_path, const CommonOverrides& over) {
  json obj = json::object();
  std::string out = ".";
  if (!config_path.empty()) {
    json doc = load_json_file(config_path);
    reject_unknown_keys(doc, {"toy", "out"}, "gen-toy config");
    if (doc.contains("toy")) obj = doc.at("toy");
    out = get_or<std::string>(doc, "out", out);
  }
  ToyConfig cfg = toy_config_from_json(obj);
  if (over.seed) cfg.seed = *over.seed;
  if (over.out) out = *over.out;
  ensure_out_dir(out);

  const auto [data, truth] = generate_toy(cfg);
  const std::string csv_path = out + "/toy.csv";
  save_csv(data, csv_path);
  save_ground_truth_json(truth, cfg, out + "/ground_truth.json");
  std::printf("gen-toy: m=%lld n=%lld d=%lld seed=%llu -> %s\n",
              static_cast<long long>(data.task_count()),
              static_cast<long long>(data.total_instances()),
              static_cast<long long>(data.d),
              static_cast<unsigned long long>(cfg.seed), csv_path.c_str());
}

void run_train(const std::string& config_path, const CommonOverrides& over) {
  json doc = load_json_file(config_path);
  reject_unknown_keys(doc, {"data", "out", "split", "train"}, "train config");
  const std::string data_path =
      get_required<std::string>(doc, "data", "train config");
  std::string out = get_or<std::string>(doc, "out", ".");
  if (over.out) out = *over.out;

  TrainConfig cfg = train_config_from_json(
      doc.contains("train") ? doc.at("train") : json::object());
  if (over.mode) cfg.mode = train_mode_from_string(*over.mode);
  if (over.seed) cfg.seed = *over.seed;

  MultiTaskDataset data = load_csv(data_path);
  std::optional<SplitSpec> split_spec;
  if (doc.contains("split")) split_spec = split_spec_from_json(doc.at("split"));
  if (over.ratio) {
    if (!split_spec) split_spec = SplitSpec{};
    split_spec->train_ratio = *over.ratio;
  }
  if (split_spec && over.seed) split_spec->seed = *over.seed;

  MultiTaskDataset train_side = data;
  if (split_spec) {
    auto [train, test] = split(data, *split_spec);
    train_side = std::move(train);
  }

  const auto [state, report] = fit(train_side, cfg);
  ensure_out_dir(out);

  SavedModel model;
  model.d = train_side.d;
  model.k = cfg.latent_count;
  model.m = train_side.task_count();
  for (const auto& task : train_side.tasks) model.task_ids.push_back(task.task_id);
  model.state = state;
  model.config = cfg;
  model.pace_final = report.pace_final;
  save_model_json(model, out + "/model.json");
  write_json(report_to_json(report), out + "/report.json");

  const LossMatrix losses = instance_losses(state.basis, state.coeffs, train_side);
  write_weights_csv(out + "/weights.csv", train_side, losses, state.weights);

  std::printf("train: mode=%s iterations=%zu termination=%s train_nmse=%.6f -> %s\n",
              to_string(cfg.mode).c_str(), report.iterations.size(),
              report.termination.c_str(), report.final_train_nmse, out.c_str());
}

void run_eval(const std::string& model_path, const std::string& data_path,
              const CommonOverrides& over) {
  const SavedModel model = load_model_json(model_path);
  const MultiTaskDataset data = load_csv(data_path);
  const std::vector<Index> mapping = map_tasks(model, data);

  std::vector<Vector> preds;
  preds.reserve(data.tasks.size());
  for (std::size_t i = 0; i < data.tasks.size(); ++i)
    preds.push_back(predict(model.state, data.tasks[i].features, mapping[i]));
  const EvalResult eval = evaluate(preds, data);

  std::printf("eval: pooled rmse=%.6f nmse=%.6f (task-mean rmse=%.6f nmse=%.6f)\n",
              eval.rmse_pooled, eval.nmse_pooled, eval.rmse_task_mean,
              eval.nmse_task_mean);
  for (const auto& te : eval.per_task)
    std::printf("  %-12s n=%-5lld rmse=%.6f nmse=%.6f\n", te.task_id.c_str(),
                static_cast<long long>(te.n_test), te.rmse, te.nmse);

  const std::string out = ensure_out_dir(over.out ? *over.out : ".");
  write_json(eval_to_json(eval), out + "/eval.json");
}

void run_weights_dump(const std::string& model_path,
                      const std::string& data_path,
                      const CommonOverrides& over,
                      std::optional<double> lambda_override,
                      std::optional<double> gamma_override) {
  const SavedModel model = load_model_json(model_path);
  const MultiTaskDataset data = load_csv(data_path);
  const std::vector<Index> mapping = map_tasks(model, data);

  // Losses at the stored model; weights re-solved at the requested pace so
  // the dumped (loss, weight) pairs are self-consistent.
  const double lambda = lambda_override.value_or(model.pace_final.instance_pace);
  const double gamma = gamma_override.value_or(model.pace_final.task_pace);

  Matrix coeffs(model.k, data.task_count());
  for (std::size_t i = 0; i < data.tasks.size(); ++i)
    coeffs.col(static_cast<Index>(i)) = model.state.coeffs.col(mapping[i]);
  const LossMatrix losses = instance_losses(model.state.basis, coeffs, data);
  PaceWeights weights;
  for (const auto& task_losses : losses.per_task)
    weights.per_task.push_back(solve_task_weights(task_losses, lambda, gamma));

  const std::string out = ensure_out_dir(over.out ? *over.out : ".");
  const std::string path = out + "/weights_dump.csv";
  write_weights_csv(path, data, losses, weights);
  std::printf("weights-dump: lambda=%.6g gamma=%.6g -> %s\n", lambda, gamma,
              path.c_str());
}

}  // namespace spmtl::cli
