#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dsch/ndmath.hpp"
#include "dsch/retrieval.hpp"

namespace dsch {

/// Features with optional multi-hot labels.
struct FeatureSet {
  Matrix features;
  std::optional<LabelSet> labels;
};

struct SynthParams {
  Index clusters = 3;
  Index train = 600;
  Index queries = 150;
  Index dim = 32;
  double sigma = 0.15;
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian clusters around centers drawn uniformly on the unit
/// sphere. Sample i of each split belongs to cluster i % clusters.
struct SyntheticData {
  Matrix centers;
  Matrix train;
  std::vector<int> train_labels;
  Matrix queries;
  std::vector<int> query_labels;
};

SyntheticData make_gaussian_clusters(const SynthParams& params);

}  // namespace dsch
