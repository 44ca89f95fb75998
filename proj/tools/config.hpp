#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spmtl/dataset.hpp"
#include "spmtl/errors.hpp"
#include "spmtl/toy.hpp"
#include "spmtl/trainer.hpp"

namespace spmtl::cli {

using json = nlohmann::json;

json load_json_file(const std::string& path);

/// Configs are strict: any key outside the allowed set is rejected before
/// computation starts.
void reject_unknown_keys(const json& obj,
                         const std::vector<std::string>& allowed,
                         const std::string& context);

ToyConfig toy_config_from_json(const json& obj);
TrainConfig train_config_from_json(const json& obj);
SplitSpec split_spec_from_json(const json& obj);

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_required(const json& obj, const std::string& key,
               const std::string& context) {
  if (!obj.contains(key))
    throw ValidationError("config: missing required key '" + key + "' in " +
                          context);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace spmtl::cli
