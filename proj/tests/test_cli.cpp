#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "spmtl/dataset.hpp"
#include "spmtl/model_io.hpp"
#include "spmtl/toy.hpp"

using namespace spmtl;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path p = fs::temp_directory_path() / "spmtl_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

int run_cli(const std::string& args) {
  const std::string log = (work_dir() / "last_run.log").string();
  const std::string cmd =
      std::string(SPMTL_CLI_PATH) + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string last_log() {
  std::ifstream in(work_dir() / "last_run.log");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

json small_toy_json(std::uint64_t seed) {
  return json{{"groups", 2},          {"tasks_per_group", 2},
              {"instances_per_task", 30}, {"latent_count", 3},
              {"dim", 6},             {"sigma_scale", 1.0},
              {"seed", seed}};
}

}  // namespace

TEST_CASE("gen-toy writes the dataset and is byte-deterministic") {
  const fs::path dir = work_dir() / "gen";
  const int rc = run_cli("gen-toy --out " + dir.string() + " --seed 4");
  CHECK(rc == 0);

  const std::string csv = slurp(dir / "toy.csv");
  // Header plus 3000 data rows under the default config.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3001);
  CHECK(csv.rfind("task_id,y,f0,", 0) == 0);
  CHECK(fs::exists(dir / "ground_truth.json"));

  const fs::path dir2 = work_dir() / "gen2";
  CHECK(run_cli("gen-toy --out " + dir2.string() + " --seed 4") == 0);
  CHECK(slurp(dir2 / "toy.csv") == csv);
  CHECK(slurp(dir2 / "ground_truth.json") == slurp(dir / "ground_truth.json"));
}

TEST_CASE("gen-toy maps an unwritable output path to exit code 2") {
  CHECK(run_cli("gen-toy --out /proc/not_writable/x") == 2);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("train") == 2);           // missing required --config
  CHECK(run_cli("no-such-command") == 2);
  CHECK(run_cli("") == 2);                // subcommand required
}

TEST_CASE("train writes model, report, and diagnostics") {
  const fs::path dir = work_dir() / "train";
  fs::create_directories(dir);
  json gen_cfg = {{"toy", small_toy_json(5)}, {"out", (dir / "data").string()}};
  write_file(dir / "gen.json", gen_cfg.dump());
  REQUIRE(run_cli("gen-toy --config " + (dir / "gen.json").string()) == 0);

  json train_cfg = {
      {"data", (dir / "data" / "toy.csv").string()},
      {"out", (dir / "run").string()},
      {"split", {{"train_ratio", 0.5}, {"seed", 1}}},
      {"train", {{"k", 3}, {"beta", 0.1}, {"max_iters", 15}}}};
  write_file(dir / "train.json", train_cfg.dump());

  SUBCASE("gomtl mode pins every weight to one") {
    REQUIRE(run_cli("train --config " + (dir / "train.json").string() +
                    " --mode gomtl") == 0);
    const SavedModel model = load_model_json((dir / "run" / "model.json").string());
    CHECK(model.config.mode == TrainMode::GOMTL);
    for (const auto& w : model.state.weights.per_task) {
      CHECK(w.minCoeff() == 1.0);
      CHECK(w.maxCoeff() == 1.0);
    }
  }

  SUBCASE("spmtl mode records the termination and iteration trace") {
    REQUIRE(run_cli("train --config " + (dir / "train.json").string()) == 0);
    json report;
    std::ifstream in(dir / "run" / "report.json");
    in >> report;
    CHECK(report.at("iterations").size() <= 50);
    const std::string termination = report.at("termination").get<std::string>();
    CHECK((termination == "converged" || termination == "max_iterations"));
    CHECK(fs::exists(dir / "run" / "weights.csv"));

    // The diagnostics dump is sorted by loss within each task.
    std::ifstream weights(dir / "run" / "weights.csv");
    std::string line;
    std::getline(weights, line);
    CHECK(line == "task_id,instance_index,loss,weight");
    std::string prev_task;
    double prev_loss = 0.0;
    while (std::getline(weights, line)) {
      std::stringstream row(line);
      std::string task, idx, loss_s, weight_s;
      std::getline(row, task, ',');
      std::getline(row, idx, ',');
      std::getline(row, loss_s, ',');
      std::getline(row, weight_s, ',');
      const double loss = std::stod(loss_s);
      if (task == prev_task) CHECK(loss >= prev_loss);
      prev_task = task;
      prev_loss = loss;
    }
  }

  SUBCASE("unknown config keys are rejected") {
    json bad = train_cfg;
    bad["typo_key"] = 1;
    write_file(dir / "bad.json", bad.dump());
    CHECK(run_cli("train --config " + (dir / "bad.json").string()) == 2);
  }
}

TEST_CASE("train with a missing dataset exits with code 2") {
  const fs::path dir = work_dir() / "train_missing";
  fs::create_directories(dir);
  json cfg = {{"data", (dir / "nope.csv").string()},
              {"train", {{"k", 2}}}};
  write_file(dir / "cfg.json", cfg.dump());
  CHECK(run_cli("train --config " + (dir / "cfg.json").string()) == 2);
}

TEST_CASE("eval on the generating truth model") {
  const fs::path dir = work_dir() / "eval";
  fs::create_directories(dir);

  // Noise-free data: the truth model predicts exactly.
  ToyConfig clean_cfg;
  clean_cfg.groups = 3;
  clean_cfg.tasks_per_group = 2;
  clean_cfg.instances_per_task = 25;
  clean_cfg.dim = 8;
  clean_cfg.sigma_scale = 0.0;
  clean_cfg.seed = 9;
  const auto [clean, truth] = generate_toy(clean_cfg);
  save_csv(clean, (dir / "clean.csv").string());

  SavedModel model;
  model.d = clean.d;
  model.k = truth.basis.cols();
  model.m = clean.task_count();
  for (const auto& task : clean.tasks) model.task_ids.push_back(task.task_id);
  model.state.basis = truth.basis;
  model.state.coeffs = truth.coefficients;
  model.state.weights = PaceWeights::ones_like(clean);
  model.config.latent_count = static_cast<int>(model.k);
  save_model_json(model, (dir / "truth_model.json").string());

  REQUIRE(run_cli("eval " + (dir / "truth_model.json").string() + " " +
                  (dir / "clean.csv").string() + " --out " + dir.string()) == 0);
  json eval;
  {
    std::ifstream in(dir / "eval.json");
    in >> eval;
  }
  CHECK(eval.at("rmse").get<double>() == doctest::Approx(0.0).epsilon(1e-12));

  // Noisy data from the same truth: nMSE must sit strictly inside (0, 1)
  // and match a scalar recomputation.
  ToyConfig noisy_cfg = clean_cfg;
  noisy_cfg.sigma_scale = 5.0;
  noisy_cfg.dim = 8;
  const auto [noisy, noisy_truth] = generate_toy(noisy_cfg);
  save_csv(noisy, (dir / "noisy.csv").string());
  SavedModel noisy_model = model;
  noisy_model.state.basis = noisy_truth.basis;
  noisy_model.state.coeffs = noisy_truth.coefficients;
  save_model_json(noisy_model, (dir / "noisy_model.json").string());
  REQUIRE(run_cli("eval " + (dir / "noisy_model.json").string() + " " +
                  (dir / "noisy.csv").string() + " --out " + dir.string()) == 0);
  {
    std::ifstream in(dir / "eval.json");
    in >> eval;
  }
  const double reported = eval.at("nmse").get<double>();
  double sq = 0.0, var = 0.0, mean = 0.0;
  Index n = 0;
  for (const auto& task : noisy.tasks)
    for (Index j = 0; j < task.size(); ++j) {
      mean += task.targets[j];
      ++n;
    }
  mean /= static_cast<double>(n);
  for (Index i = 0; i < noisy.task_count(); ++i) {
    const TaskData& task = noisy.tasks[i];
    const Vector p = noisy_truth.basis * noisy_truth.coefficients.col(i);
    for (Index j = 0; j < task.size(); ++j) {
      double dot = 0.0;
      for (Index f = 0; f < noisy.d; ++f) dot += p[f] * task.features(j, f);
      sq += (task.targets[j] - dot) * (task.targets[j] - dot);
      var += (task.targets[j] - mean) * (task.targets[j] - mean);
    }
  }
  CHECK(reported == doctest::Approx(sq / var).epsilon(1e-10));
  CHECK(reported > 0.0);
  CHECK(reported < 1.0);

  // Tampered model: wrong U shape.
  json doc;
  {
    std::ifstream in(dir / "truth_model.json");
    in >> doc;
  }
  doc["U"] = std::vector<double>{1.0, 2.0};
  write_file(dir / "tampered.json", doc.dump());
  CHECK(run_cli("eval " + (dir / "tampered.json").string() + " " +
                (dir / "clean.csv").string()) == 2);

  // Dimension mismatch between model and data.
  ToyConfig other = clean_cfg;
  other.dim = 5;
  const auto [other_data, other_truth] = generate_toy(other);
  save_csv(other_data, (dir / "other.csv").string());
  CHECK(run_cli("eval " + (dir / "truth_model.json").string() + " " +
                (dir / "other.csv").string()) == 2);
}

TEST_CASE("weights-dump re-solves weights at the requested pace") {
  const fs::path dir = work_dir() / "dump";
  fs::create_directories(dir);
  ToyConfig cfg;
  cfg.groups = 2;
  cfg.tasks_per_group = 2;
  cfg.instances_per_task = 12;
  cfg.latent_count = 3;
  cfg.dim = 5;
  cfg.seed = 2;
  const auto [data, truth] = generate_toy(cfg);
  save_csv(data, (dir / "toy.csv").string());

  SavedModel model;
  model.d = data.d;
  model.k = 3;
  model.m = data.task_count();
  for (const auto& task : data.tasks) model.task_ids.push_back(task.task_id);
  model.state.basis = truth.basis;
  model.state.coeffs = truth.coefficients;
  model.state.weights = PaceWeights::ones_like(data);
  model.pace_final.instance_pace = 1.0;
  model.pace_final.task_pace = 0.0;
  save_model_json(model, (dir / "model.json").string());

  REQUIRE(run_cli("weights-dump " + (dir / "model.json").string() + " " +
                  (dir / "toy.csv").string() + " --out " + dir.string() +
                  " --lambda 0.5 --gamma 0.0") == 0);
  std::ifstream in(dir / "weights_dump.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "task_id,instance_index,loss,weight");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == data.total_instances());
}

TEST_CASE("benchmark sweep, summary consistency, and resume") {
  const fs::path dir = work_dir() / "bench";
  fs::create_directories(dir);
  json cfg = {{"data", {{"toy", small_toy_json(3)}}},
              {"modes", {"spmtl", "gomtl"}},
              {"ratios", {0.3}},
              {"seeds", {0, 1}},
              {"train", {{"k", 3}, {"beta", 0.1}, {"max_iters", 10}}},
              {"workers", 2},
              {"out", (dir / "out").string()}};
  write_file(dir / "bench.json", cfg.dump());

  REQUIRE(run_cli("benchmark --config " + (dir / "bench.json").string()) == 0);

  // modes x ratios x seeds = 4 result rows.
  std::ifstream results(dir / "out" / "results.csv");
  std::string line;
  std::getline(results, line);
  CHECK(line == "method,train_ratio,seed,rmse,nmse,status");
  int rows = 0;
  double nmse_sum = 0.0;
  std::vector<double> spmtl_nmse;
  while (std::getline(results, line)) {
    ++rows;
    std::stringstream row(line);
    std::string method, ratio, seed, rmse_s, nmse_s, status;
    std::getline(row, method, ',');
    std::getline(row, ratio, ',');
    std::getline(row, seed, ',');
    std::getline(row, rmse_s, ',');
    std::getline(row, nmse_s, ',');
    std::getline(row, status, ',');
    CHECK(status == "ok");
    nmse_sum += std::stod(nmse_s);
    if (method == "spmtl") spmtl_nmse.push_back(std::stod(nmse_s));
  }
  CHECK(rows == 4);

  // Summary means match a recomputation from the CSV rows.
  json summary;
  {
    std::ifstream in(dir / "out" / "summary.json");
    in >> summary;
  }
  CHECK(summary.at("cells_reused").get<int>() == 0);
  double spmtl_mean = 0.0;
  for (const auto& c : summary.at("cases"))
    if (c.at("method") == "spmtl") spmtl_mean = c.at("mean_nmse").get<double>();
  CHECK(spmtl_mean ==
        doctest::Approx((spmtl_nmse[0] + spmtl_nmse[1]) / 2.0).epsilon(1e-12));
  CHECK(summary.contains("t_tests"));

  // Resume: a second run must reuse every cached cell and reproduce the
  // results byte for byte.
  const std::string before = slurp(dir / "out" / "results.csv");
  REQUIRE(run_cli("benchmark --config " + (dir / "bench.json").string()) == 0);
  {
    std::ifstream in(dir / "out" / "summary.json");
    in >> summary;
  }
  CHECK(summary.at("cells_reused").get<int>() == 4);
  CHECK(slurp(dir / "out" / "results.csv") == before);
}
