#pragma once

#include <string>

#include "commands.hpp"

namespace spmtl::cli {

/// Factorial sweep (modes x ratios x seeds x beta grid) sharing one split
/// per (seed, ratio) across modes. Cells are cached by config hash under
/// <out>/cells so an interrupted sweep resumes without recomputing.
void run_benchmark(const std::string& config_path, const CommonOverrides& over);

}  // namespace spmtl::cli
