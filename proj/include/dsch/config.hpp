#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsch/retrieval.hpp"
#include "dsch/training.hpp"

namespace dsch {

/// JSON run configuration: training hyperparameters plus optional data paths
/// and evaluation depths. Unknown keys are rejected; absent keys keep defaults.
struct RunConfig {
  TrainConfig train;
  std::string features;
  std::string labels;
  std::string query_features;
  std::string query_labels;
  std::size_t map_k = 5000;
  std::vector<std::size_t> precision_k{100, 500, 1000, 5000};

  static RunConfig from_json(const nlohmann::json& doc);
  /// Parses `path`; syntax errors carry the byte offset.
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;
  EvalOptions eval_options() const;
};

}  // namespace dsch
