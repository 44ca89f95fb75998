#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bench.hpp"
#include "commands.hpp"
#include "spmtl/errors.hpp"

namespace {

using spmtl::cli::CommonOverrides;

void add_common_flags(CLI::App* cmd, CommonOverrides& over) {
  cmd->add_option("--out", over.out, "Output directory");
  cmd->add_option("--seed", over.seed, "Seed override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-paced multi-task regression toolkit"};
  app.require_subcommand(1);

  CommonOverrides over;
  std::string config_path;
  std::string model_path, data_path;
  std::optional<double> lambda_override, gamma_override;

  CLI::App* gen = app.add_subcommand("gen-toy", "Generate the synthetic benchmark");
  gen->add_option("--config", config_path, "JSON config file");
  add_common_flags(gen, over);

  CLI::App* train = app.add_subcommand("train", "Fit a model on a CSV dataset");
  train->add_option("--config", config_path, "JSON config file")->required();
  add_common_flags(train, over);
  train->add_option("--mode", over.mode, "spmtl|spiwl|gomtl");
  train->add_option("--ratio", over.ratio, "Train split ratio override");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a model on a dataset");
  eval->add_option("model", model_path, "Model JSON file")->required();
  eval->add_option("data", data_path, "Dataset CSV file")->required();
  eval->add_option("--out", over.out, "Output directory");

  CLI::App* dump =
      app.add_subcommand("weights-dump", "Dump per-instance losses and weights");
  dump->add_option("model", model_path, "Model JSON file")->required();
  dump->add_option("data", data_path, "Dataset CSV file")->required();
  dump->add_option("--out", over.out, "Output directory");
  dump->add_option("--lambda", lambda_override, "Instance pace override");
  dump->add_option("--gamma", gamma_override, "Task pace override");

  CLI::App* bench = app.add_subcommand("benchmark", "Run a full sweep");
  bench->add_option("--config", config_path, "JSON config file")->required();
  bench->add_option("--out", over.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) spmtl::cli::run_gen_toy(config_path, over);
    if (train->parsed()) spmtl::cli::run_train(config_path, over);
    if (eval->parsed()) spmtl::cli::run_eval(model_path, data_path, over);
    if (dump->parsed())
      spmtl::cli::run_weights_dump(model_path, data_path, over,
                                   lambda_override, gamma_override);
    if (bench->parsed()) spmtl::cli::run_benchmark(config_path, over);
    return 0;
  } catch (const spmtl::ValidationError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  } catch (const spmtl::SolverError& err) {
    std::fprintf(stderr, "solver error: %s\n", err.what());
    return 1;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
}
