#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "spmtl/errors.hpp"
#include "spmtl/model_io.hpp"
#include "spmtl/rng.hpp"

using namespace spmtl;

namespace {

SavedModel random_model(std::uint64_t seed, Index d, Index k, Index m) {
  RandomStream rng(seed);
  SavedModel model;
  model.d = d;
  model.k = k;
  model.m = m;
  model.state.basis.resize(d, k);
  model.state.coeffs.resize(k, m);
  for (Index c = 0; c < k; ++c)
    for (Index r = 0; r < d; ++r) model.state.basis(r, c) = rng.normal();
  for (Index c = 0; c < m; ++c)
    for (Index r = 0; r < k; ++r) model.state.coeffs(r, c) = rng.normal();
  for (Index i = 0; i < m; ++i) {
    model.task_ids.push_back("task_" + std::to_string(i));
    Vector w(3);
    for (Index j = 0; j < 3; ++j) w[j] = rng.uniform();
    model.state.weights.per_task.push_back(std::move(w));
  }
  model.pace_final.instance_pace = rng.uniform();
  model.pace_final.task_pace = rng.uniform();
  return model;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("save/load reproduces predictions bit-compatibly") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SavedModel model = random_model(seed, 6, 3, 4);
    const std::string path = temp_path("model_rt.json");
    save_model_json(model, path);
    const SavedModel loaded = load_model_json(path);

    CHECK(loaded.d == model.d);
    CHECK(loaded.k == model.k);
    CHECK(loaded.task_ids == model.task_ids);
    CHECK(oracle::exactly_equal(loaded.state.basis, model.state.basis));
    CHECK(oracle::exactly_equal(loaded.state.coeffs, model.state.coeffs));
    CHECK(loaded.pace_final.instance_pace == model.pace_final.instance_pace);

    RandomStream rng(100 + seed);
    FeatureMatrix features(5, 6);
    for (Index r = 0; r < 5; ++r)
      for (Index c = 0; c < 6; ++c) features(r, c) = rng.normal();
    for (Index i = 0; i < model.m; ++i) {
      const Vector before = predict(model.state, features, i);
      const Vector after = predict(loaded.state, features, i);
      CHECK(oracle::exactly_equal(before, after));
    }
  }
}

TEST_CASE("config fields survive the round trip") {
  SavedModel model = random_model(3, 4, 2, 2);
  model.config.latent_count = 2;
  model.config.coeff_l1 = 0.125;
  model.config.mode = TrainMode::SPIWL;
  model.config.pace.automatic = false;
  model.config.pace.instance_pace0 = 0.75;
  model.config.pace_percentile = 0.9;
  model.config.polish_rounds = 3;
  model.config.seed = 987654321;
  const std::string path = temp_path("model_cfg.json");
  save_model_json(model, path);
  const SavedModel loaded = load_model_json(path);
  CHECK(loaded.config.latent_count == 2);
  CHECK(loaded.config.coeff_l1 == 0.125);
  CHECK(loaded.config.mode == TrainMode::SPIWL);
  CHECK_FALSE(loaded.config.pace.automatic);
  CHECK(loaded.config.pace.instance_pace0 == 0.75);
  CHECK(loaded.config.pace_percentile == 0.9);
  CHECK(loaded.config.polish_rounds == 3);
  CHECK(loaded.config.seed == 987654321);
  CHECK(loaded.task_index("task_1") == 1);
  CHECK(loaded.task_index("nope") == -1);
}

TEST_CASE("tampered model files fail validation") {
  const SavedModel model = random_model(4, 4, 2, 3);
  const std::string path = temp_path("model_tamper.json");
  save_model_json(model, path);

  nlohmann::json doc;
  {
    std::ifstream in(path);
    in >> doc;
  }
  doc["U"] = std::vector<double>{1.0, 2.0, 3.0};  // wrong element count
  {
    std::ofstream out(path);
    out << doc.dump();
  }
  CHECK_THROWS_AS(load_model_json(path), ValidationError);

  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_model_json(path), ValidationError);
  CHECK_THROWS_AS(load_model_json("/nonexistent/model.json"), IoError);
}
