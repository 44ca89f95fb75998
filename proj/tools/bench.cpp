#include "bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <thread>
#include <vector>

#include "config.hpp"
#include "spmtl/errors.hpp"
#include "spmtl/metrics.hpp"
#include "spmtl/toy.hpp"
#include "spmtl/trainer.hpp"

namespace spmtl::cli {

namespace {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct DataSource {
  bool is_toy = false;
  ToyConfig toy;  // seed replaced per cell
  std::string csv_path;
  MultiTaskDataset csv_data;  // loaded once, read-only across workers

  json descriptor() const {
    if (is_toy) {
      json j;
      j["kind"] = "toy";
      j["groups"] = toy.groups;
      j["tasks_per_group"] = toy.tasks_per_group;
      j["instances_per_task"] = toy.instances_per_task;
      j["latent_count"] = toy.latent_count;
      j["dim"] = toy.dim;
      j["sigma_scale"] = toy.sigma_scale;
      return j;
    }
    return json{{"kind", "csv"}, {"path", csv_path}};
  }
};

struct Cell {
  std::string mode;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  double beta = 0.0;
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double nmse = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

json cell_descriptor(const Cell& cell, const DataSource& source,
                     const TrainConfig& base) {
  json j;
  j["data"] = source.descriptor();
  j["mode"] = cell.mode;
  j["ratio"] = cell.ratio;
  j["seed"] = cell.seed;
  j["beta"] = cell.beta;
  j["k"] = base.latent_count;
  j["alpha"] = base.basis_reg;
  j["max_iters"] = base.max_iters;
  j["tol"] = base.tol;
  j["mu1"] = base.pace_growth;
  j["mu2"] = base.pace_decay;
  j["ridge"] = base.ridge_strength;
  j["pace_percentile"] = base.pace_percentile;
  j["polish_rounds"] = base.polish_rounds;
  j["pace_auto"] = base.pace.automatic;
  j["lambda0"] = base.pace.instance_pace0;
  j["gamma0"] = base.pace.task_pace0;
  return j;
}

void compute_cell(Cell& cell, const DataSource& source,
                  const TrainConfig& base) {
  try {
    MultiTaskDataset dataset;
    if (source.is_toy) {
      ToyConfig toy = source.toy;
      toy.seed = cell.seed;
      dataset = generate_toy(toy).first;
    } else {
      dataset = source.csv_data;
    }
    auto [train, test] = split(dataset, {cell.ratio, cell.seed});

    TrainConfig cfg = base;
    cfg.mode = train_mode_from_string(cell.mode);
    cfg.coeff_l1 = cell.beta;
    cfg.seed = cell.seed;
    cfg.record_weight_snapshots = false;
    const auto [state, report] = fit(train, cfg);

    std::vector<Vector> preds;
    preds.reserve(test.tasks.size());
    for (Index i = 0; i < test.task_count(); ++i)
      preds.push_back(predict(state, test.tasks[i].features, i));
    const EvalResult eval = evaluate(preds, test);
    cell.rmse = eval.rmse_pooled;
    cell.nmse = eval.nmse_pooled;
    cell.status = "ok";
  } catch (const std::exception& err) {
    cell.status = std::string("failed: ") + err.what();
  }
}

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;  // sample std (n - 1)
  int n = 0;
};

Stats sample_stats(const std::vector<double>& values) {
  Stats s;
  s.n = static_cast<int>(values.size());
  if (s.n == 0) return s;
  for (const double v : values) s.mean += v;
  s.mean /= s.n;
  if (s.n > 1) {
    double sq = 0.0;
    for (const double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / (s.n - 1));
  }
  return s;
}

}  // namespace

void run_benchmark(const std::string& config_path, const CommonOverrides& over) {
  json doc = load_json_file(config_path);
  reject_unknown_keys(doc,
                      {"data", "modes", "ratios", "seeds", "train",
                       "beta_grid", "t_tests", "workers", "out"},
                      "benchmark config");

  DataSource source;
  {
    const json data = get_required<json>(doc, "data", "benchmark config");
    reject_unknown_keys(data, {"toy", "csv"}, "benchmark data");
    if (data.contains("toy") == data.contains("csv"))
      throw ValidationError("benchmark data: exactly one of 'toy' or 'csv'");
    if (data.contains("toy")) {
      source.is_toy = true;
      source.toy = toy_config_from_json(data.at("toy"));
    } else {
      source.csv_path = data.at("csv").get<std::string>();
      source.csv_data = load_csv(source.csv_path);
    }
  }

  std::vector<std::string> modes =
      get_or<std::vector<std::string>>(doc, "modes", {"spmtl", "spiwl", "gomtl"});
  for (const auto& mode : modes) train_mode_from_string(mode);  // validate

  std::vector<double> ratios =
      get_or<std::vector<double>>(doc, "ratios", {0.05, 0.10, 0.15});
  std::vector<std::uint64_t> seeds;
  if (doc.contains("seeds") && doc.at("seeds").is_object()) {
    const json& spec = doc.at("seeds");
    reject_unknown_keys(spec, {"count", "base"}, "benchmark seeds");
    const int count = get_or(spec, "count", 10);
    const std::uint64_t base = get_or<std::uint64_t>(spec, "base", 0);
    for (int i = 0; i < count; ++i) seeds.push_back(base + i);
  } else {
    seeds = get_or<std::vector<std::uint64_t>>(doc, "seeds",
                                               {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  }
  if (modes.empty() || ratios.empty() || seeds.empty())
    throw ValidationError("benchmark config: modes, ratios, seeds must be nonempty");

  json train_obj = doc.contains("train") ? doc.at("train") : json::object();
  if (source.is_toy && !train_obj.contains("k"))
    train_obj["k"] = source.toy.latent_count;  // ground-truth latent count
  const TrainConfig base = train_config_from_json(train_obj);

  std::vector<double> beta_grid =
      get_or<std::vector<double>>(doc, "beta_grid", {base.coeff_l1});
  const bool want_t_tests = get_or(doc, "t_tests", true);
  const int workers = std::max(1, get_or(doc, "workers", 1));

  std::string out = get_or<std::string>(doc, "out", "benchmark_out");
  if (over.out) out = *over.out;
  std::filesystem::create_directories(out + "/cells");

  // Cell list in deterministic order.
  std::vector<Cell> cells;
  for (const std::uint64_t seed : seeds)
    for (const double ratio : ratios)
      for (const auto& mode : modes)
        for (const double beta : beta_grid)
          cells.push_back(Cell{mode, ratio, seed, beta});

  std::vector<std::string> cache_paths(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string key = cell_descriptor(cells[i], source, base).dump();
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(key)));
    cache_paths[i] = out + "/cells/" + hex + ".json";
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> reused{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      Cell& cell = cells[i];
      // Resume from the cell cache when possible.
      if (std::filesystem::exists(cache_paths[i])) {
        try {
          std::ifstream in(cache_paths[i]);
          json cached;
          in >> cached;
          cell.rmse = cached.at("rmse").get<double>();
          cell.nmse = cached.at("nmse").get<double>();
          cell.status = cached.at("status").get<std::string>();
          reused.fetch_add(1);
          continue;
        } catch (const std::exception&) {
          // unreadable cache entry; recompute below
        }
      }
      compute_cell(cell, source, base);
      json cached = cell_descriptor(cell, source, base);
      cached["rmse"] = cell.rmse;
      cached["nmse"] = cell.nmse;
      cached["status"] = cell.status;
      std::ofstream file(cache_paths[i]);
      file << cached.dump(2) << '\n';
    }
  };
  {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Pick the best beta per (mode, ratio) by mean test nMSE.
  struct CaseKey {
    std::string mode;
    double ratio;
    bool operator<(const CaseKey& o) const {
      return mode < o.mode || (mode == o.mode && ratio < o.ratio);
    }
  };
  std::map<CaseKey, double> chosen_beta;
  for (const auto& mode : modes) {
    for (const double ratio : ratios) {
      double best_beta = beta_grid.front();
      double best_mean = std::numeric_limits<double>::infinity();
      for (const double beta : beta_grid) {
        std::vector<double> nmses;
        for (const Cell& cell : cells)
          if (cell.mode == mode && cell.ratio == ratio && cell.beta == beta &&
              cell.status == "ok")
            nmses.push_back(cell.nmse);
        if (nmses.empty()) continue;
        const double mean = sample_stats(nmses).mean;
        if (mean < best_mean) {
          best_mean = mean;
          best_beta = beta;
        }
      }
      chosen_beta[{mode, ratio}] = best_beta;
    }
  }

  // Results table: the five spec columns plus a status column for failed
  // cells.
  const std::string results_path = out + "/results.csv";
  {
    std::ofstream file(results_path);
    if (!file) throw IoError("cannot write results file: " + results_path);
    file << "method,train_ratio,seed,rmse,nmse,status\n";
    char line[256];
    for (const auto& mode : modes)
      for (const double ratio : ratios)
        for (const std::uint64_t seed : seeds)
          for (const Cell& cell : cells) {
            if (cell.mode != mode || cell.ratio != ratio ||
                cell.seed != seed || cell.beta != chosen_beta[{mode, ratio}])
              continue;
            std::snprintf(line, sizeof(line), "%s,%g,%llu,%.17g,%.17g,%s\n",
                          cell.mode.c_str(), cell.ratio,
                          static_cast<unsigned long long>(cell.seed), cell.rmse,
                          cell.nmse, cell.status.c_str());
            file << line;
          }
  }

  json summary;
  summary["results_csv"] = results_path;
  summary["cells_total"] = cells.size();
  summary["cells_reused"] = reused.load();
  json cases = json::array();
  for (const auto& mode : modes) {
    for (const double ratio : ratios) {
      std::vector<double> rmses, nmses;
      for (const Cell& cell : cells)
        if (cell.mode == mode && cell.ratio == ratio &&
            cell.beta == chosen_beta[{mode, ratio}] && cell.status == "ok") {
          rmses.push_back(cell.rmse);
          nmses.push_back(cell.nmse);
        }
      const Stats r = sample_stats(rmses);
      const Stats n = sample_stats(nmses);
      cases.push_back({{"method", mode},
                       {"train_ratio", ratio},
                       {"beta", chosen_beta[{mode, ratio}]},
                       {"n", n.n},
                       {"mean_rmse", r.mean},
                       {"std_rmse", r.stddev},
                       {"mean_nmse", n.mean},
                       {"std_nmse", n.stddev}});
      std::printf("benchmark: %-6s ratio=%-5g nmse=%.4f+-%.4f rmse=%.4f+-%.4f (beta=%g, n=%d)\n",
                  mode.c_str(), ratio, n.mean, n.stddev, r.mean, r.stddev,
                  chosen_beta[{mode, ratio}], n.n);
    }
  }
  summary["cases"] = std::move(cases);

  // Paired t-tests: spmtl against each other mode, per ratio, paired by seed.
  if (want_t_tests &&
      std::find(modes.begin(), modes.end(), "spmtl") != modes.end()) {
    json tests = json::array();
    for (const double ratio : ratios) {
      for (const auto& mode : modes) {
        if (mode == "spmtl") continue;
        std::vector<double> a, b;
        for (const std::uint64_t seed : seeds) {
          std::optional<double> na, nb;
          for (const Cell& cell : cells) {
            if (cell.ratio != ratio || cell.seed != seed ||
                cell.status != "ok")
              continue;
            if (cell.mode == "spmtl" &&
                cell.beta == chosen_beta[{"spmtl", ratio}])
              na = cell.nmse;
            if (cell.mode == mode && cell.beta == chosen_beta[{mode, ratio}])
              nb = cell.nmse;
          }
          if (na && nb) {
            a.push_back(*na);
            b.push_back(*nb);
          }
        }
        if (a.size() < 2) continue;
        Vector va(static_cast<Index>(a.size())), vb(static_cast<Index>(b.size()));
        for (std::size_t i = 0; i < a.size(); ++i) {
          va[static_cast<Index>(i)] = a[i];
          vb[static_cast<Index>(i)] = b[i];
        }
        const TTestResult t = paired_t_test(va, vb, 0.95);
        tests.push_back({{"ratio", ratio},
                         {"baseline", mode},
                         {"metric", "nmse"},
                         {"t", std::isfinite(t.t) ? json(t.t) : json(nullptr)},
                         {"significant", t.significant},
                         {"degenerate", t.degenerate},
                         {"n", a.size()}});
      }
    }
    summary["t_tests"] = std::move(tests);
  }

  std::ofstream file(out + "/summary.json");
  if (!file) throw IoError("cannot write summary file");
  file << summary.dump(2) << '\n';
}

}  // namespace spmtl::cli
