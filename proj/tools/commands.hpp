#pragma once

#include <optional>
#include <string>

namespace spmtl::cli {

/// Flag overrides shared by the subcommands; unset optionals fall back to
/// the config file (or its defaults).
struct CommonOverrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<double> ratio;
};

void run_gen_toy(const std::string& config_path, const CommonOverrides& over);
void run_train(const std::string& config_path, const CommonOverrides& over);
void run_eval(const std::string& model_path, const std::string& data_path,
              const CommonOverrides& over);
void run_weights_dump(const std::string& model_path,
                      const std::string& data_path,
                      const CommonOverrides& over,
                      std::optional<double> lambda_override,
                      std::optional<double> gamma_override);

}  // namespace spmtl::cli
