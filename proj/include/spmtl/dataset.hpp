#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spmtl/types.hpp"

namespace spmtl {

/// One regression task: n_i instances of d features each, with targets.
struct TaskData {
  std::string task_id;
  FeatureMatrix features;  // n_i x d
  Vector targets;          // n_i

  Index size() const { return targets.size(); }
};

/// A fixed collection of tasks sharing one feature space. Immutable after
/// construction; safe for concurrent read access.
struct MultiTaskDataset {
  std::vector<TaskData> tasks;
  Index d = 0;

  Index task_count() const { return static_cast<Index>(tasks.size()); }
  Index total_instances() const;
};

struct SplitSpec {
  double train_ratio = 0.15;  // in (0, 1)
  std::uint64_t seed = 0;
};

/// Column mapping for load_csv. An empty feature_columns list means every
/// header column other than the task and target columns is a feature, in
/// header order.
struct CsvSchema {
  std::string task_column = "task_id";
  std::string target_column = "y";
  std::vector<std::string> feature_columns;
};

/// Loads `task_id,y,f0,...,f{d-1}`-style CSV. Tasks keep first-appearance
/// order; d is inferred from the header. Throws ValidationError with the
/// offending line number on parse or structure problems.
MultiTaskDataset load_csv(const std::string& path, const CsvSchema& schema = {});

/// Writes the canonical CSV form (header task_id,y,f0,...). Values are
/// printed with round-trip precision so a reload reproduces exact doubles.
void save_csv(const MultiTaskDataset& data, const std::string& path);

/// Checks every dataset invariant; throws ValidationError naming the task
/// and row of the first violation.
void validate(const MultiTaskDataset& data);

/// Per task, exactly max(1, round-half-up(ratio * n_i)) instances go to
/// train and the rest to test. Deterministic in (data, spec). Throws if any
/// task would end up with an empty test side.
std::pair<MultiTaskDataset, MultiTaskDataset> split(const MultiTaskDataset& data,
                                                    const SplitSpec& spec);

std::size_t train_count(double train_ratio, std::size_t n_instances);

// Optional per-column z-scoring. Stats are pooled over all tasks; columns
// with zero variance are left unscaled.
struct ColumnStats {
  Vector mean;
  Vector stddev;
};
ColumnStats column_stats(const MultiTaskDataset& data);
MultiTaskDataset standardize(const MultiTaskDataset& data, const ColumnStats& stats);

}  // namespace spmtl
