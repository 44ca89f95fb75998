#include "spmtl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "spmtl/errors.hpp"
#include "spmtl/rng.hpp"

namespace spmtl {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t line_no,
                  const std::string& column) {
  const std::string cell = trim(raw);
  double value = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw ValidationError("line " + std::to_string(line_no) +
                          ": cannot parse value '" + cell + "' in column '" +
                          column + "'");
  if (!std::isfinite(value))
    throw ValidationError("line " + std::to_string(line_no) +
                          ": non-finite value in column '" + column + "'");
  return value;
}

void format_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

Index MultiTaskDataset::total_instances() const {
  Index n = 0;
  for (const auto& t : tasks) n += t.size();
  return n;
}

MultiTaskDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("dataset file has no header: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_line(line);
  auto column_index = [&](const std::string& name) -> std::ptrdiff_t {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };

  const std::ptrdiff_t task_col = column_index(schema.task_column);
  if (task_col < 0)
    throw ValidationError("missing task column '" + schema.task_column +
                          "' in " + path);
  const std::ptrdiff_t target_col = column_index(schema.target_column);
  if (target_col < 0)
    throw ValidationError("missing target column '" + schema.target_column +
                          "' in " + path);

  std::vector<std::ptrdiff_t> feature_cols;
  std::vector<std::string> feature_names;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (static_cast<std::ptrdiff_t>(c) == task_col ||
          static_cast<std::ptrdiff_t>(c) == target_col)
        continue;
      feature_cols.push_back(static_cast<std::ptrdiff_t>(c));
      feature_names.push_back(header[c]);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      const std::ptrdiff_t c = column_index(name);
      if (c < 0)
        throw ValidationError("missing feature column '" + name + "' in " +
                              path);
      feature_cols.push_back(c);
      feature_names.push_back(name);
    }
  }
  if (feature_cols.empty())
    throw ValidationError("no feature columns in " + path);
  const Index d = static_cast<Index>(feature_cols.size());

  struct Builder {
    std::string id;
    std::vector<double> features;  // row-major
    std::vector<double> targets;
  };
  std::vector<Builder> builders;
  std::unordered_map<std::string, std::size_t> task_index;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " columns, got " +
                            std::to_string(cells.size()));

    const std::string id = trim(cells[task_col]);
    if (id.empty())
      throw ValidationError("line " + std::to_string(line_no) +
                            ": empty task id");
    auto [it, inserted] = task_index.try_emplace(id, builders.size());
    if (inserted) builders.push_back(Builder{id, {}, {}});
    Builder& b = builders[it->second];

    b.targets.push_back(parse_cell(cells[target_col], line_no, schema.target_column));
    for (Index f = 0; f < d; ++f)
      b.features.push_back(
          parse_cell(cells[feature_cols[f]], line_no, feature_names[f]));
  }

  if (builders.empty())
    throw ValidationError("dataset file has no data rows: " + path);

  MultiTaskDataset data;
  data.d = d;
  data.tasks.reserve(builders.size());
  for (auto& b : builders) {
    TaskData task;
    task.task_id = std::move(b.id);
    const Index n = static_cast<Index>(b.targets.size());
    task.features = Eigen::Map<const FeatureMatrix>(b.features.data(), n, d);
    task.targets = Eigen::Map<const Vector>(b.targets.data(), n);
    data.tasks.push_back(std::move(task));
  }
  validate(data);
  return data;
}

void save_csv(const MultiTaskDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file: " + path);

  std::string line = "task_id,y";
  for (Index f = 0; f < data.d; ++f) line += ",f" + std::to_string(f);
  out << line << '\n';

  for (const auto& task : data.tasks) {
    for (Index j = 0; j < task.size(); ++j) {
      line = task.task_id;
      line += ',';
      format_double(line, task.targets[j]);
      for (Index f = 0; f < data.d; ++f) {
        line += ',';
        format_double(line, task.features(j, f));
      }
      out << line << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

void validate(const MultiTaskDataset& data) {
  if (data.tasks.empty()) throw ValidationError("dataset has no tasks");
  if (data.d < 1) throw ValidationError("dataset has no feature columns");
  for (const auto& task : data.tasks) {
    if (task.targets.size() < 1)
      throw ValidationError("task '" + task.task_id + "': no instances");
    if (task.features.rows() != task.targets.size())
      throw ValidationError("task '" + task.task_id +
                            "': feature rows and targets disagree");
    if (task.features.cols() != data.d)
      throw ValidationError("task '" + task.task_id + "': feature width " +
                            std::to_string(task.features.cols()) +
                            " does not match dataset d=" +
                            std::to_string(data.d));
    for (Index j = 0; j < task.size(); ++j) {
      if (!std::isfinite(task.targets[j]))
        throw ValidationError("task '" + task.task_id + "' row " +
                              std::to_string(j) + ": non-finite target");
      for (Index f = 0; f < data.d; ++f)
        if (!std::isfinite(task.features(j, f)))
          throw ValidationError("task '" + task.task_id + "' row " +
                                std::to_string(j) + ": non-finite feature " +
                                std::to_string(f));
    }
  }
}

std::size_t train_count(double train_ratio, std::size_t n_instances) {
  const double raw = std::floor(train_ratio * static_cast<double>(n_instances) + 0.5);
  return std::max<std::size_t>(1, static_cast<std::size_t>(raw));
}

std::pair<MultiTaskDataset, MultiTaskDataset> split(const MultiTaskDataset& data,
                                                    const SplitSpec& spec) {
  if (!(spec.train_ratio > 0.0 && spec.train_ratio < 1.0))
    throw ValidationError("train_ratio must lie in (0, 1)");
  validate(data);

  MultiTaskDataset train, test;
  train.d = test.d = data.d;

  for (std::size_t i = 0; i < data.tasks.size(); ++i) {
    const TaskData& task = data.tasks[i];
    const std::size_t n = static_cast<std::size_t>(task.size());
    const std::size_t n_train = train_count(spec.train_ratio, n);
    if (n_train >= n)
      throw ValidationError("task '" + task.task_id +
                            "': split would leave an empty test side (n_i=" +
                            std::to_string(n) + ")");

    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    RandomStream rng(substream_seed(spec.seed, i));
    for (std::size_t j = n - 1; j > 0; --j)
      std::swap(order[j], order[rng.bounded(j + 1)]);

    std::vector<Index> train_idx(order.begin(), order.begin() + n_train);
    std::vector<Index> test_idx(order.begin() + n_train, order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    auto take = [&](const std::vector<Index>& rows) {
      TaskData out;
      out.task_id = task.task_id;
      out.features.resize(static_cast<Index>(rows.size()), data.d);
      out.targets.resize(static_cast<Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        out.features.row(static_cast<Index>(r)) = task.features.row(rows[r]);
        out.targets[static_cast<Index>(r)] = task.targets[rows[r]];
      }
      return out;
    };
    train.tasks.push_back(take(train_idx));
    test.tasks.push_back(take(test_idx));
  }
  return {std::move(train), std::move(test)};
}

ColumnStats column_stats(const MultiTaskDataset& data) {
  const Index n = data.total_instances();
  ColumnStats stats;
  stats.mean = Vector::Zero(data.d);
  stats.stddev = Vector::Zero(data.d);
  for (const auto& task : data.tasks)
    stats.mean += task.features.colwise().sum().transpose();
  stats.mean /= static_cast<double>(n);
  for (const auto& task : data.tasks) {
    const auto centered = task.features.rowwise() - stats.mean.transpose();
    stats.stddev += centered.array().square().colwise().sum().matrix().transpose();
  }
  stats.stddev = (stats.stddev / static_cast<double>(n)).cwiseSqrt();
  return stats;
}

MultiTaskDataset standardize(const MultiTaskDataset& data, const ColumnStats& stats) {
  if (stats.mean.size() != data.d || stats.stddev.size() != data.d)
    throw ValidationError("column stats do not match dataset width");
  MultiTaskDataset out = data;
  Vector scale = stats.stddev;
  for (Index f = 0; f < data.d; ++f)
    if (scale[f] <= 0.0) scale[f] = 1.0;
  for (auto& task : out.tasks) {
    task.features.rowwise() -= stats.mean.transpose();
    task.features.array().rowwise() /= scale.transpose().array();
  }
  return out;
}

}  // namespace spmtl
