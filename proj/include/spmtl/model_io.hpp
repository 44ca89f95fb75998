#pragma once

#include <string>
#include <vector>

#include "spmtl/trainer.hpp"
#include "spmtl/types.hpp"

namespace spmtl {

/// On-disk model document:
///   {format_version, d, k, m, task_ids, U (row-major), V (row-major),
///    final_w, config, pace_final}
/// Doubles are serialized with round-trip precision, so a save/load cycle
/// reproduces predictions bit-compatibly.
struct SavedModel {
  int format_version = 1;
  Index d = 0;
  Index k = 0;
  Index m = 0;
  std::vector<std::string> task_ids;
  ModelState state;
  TrainConfig config;
  PaceSchedule pace_final;

  Index task_index(const std::string& task_id) const;  // -1 if unknown
};

void save_model_json(const SavedModel& model, const std::string& path);
SavedModel load_model_json(const std::string& path);

}  // namespace spmtl
