#include "dsch/dataset.hpp"

#include <random>

#include "dsch/seeds.hpp"

namespace dsch {

SyntheticData make_gaussian_clusters(const SynthParams& p) {
  if (p.clusters < 1 || p.dim < 1 || p.train < 0 || p.queries < 0 || !(p.sigma >= 0.0)) {
    throw ContractError("synth: invalid parameters");
  }
  std::mt19937_64 rng(derive_seed(p.seed, SeedStream::Synth));
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticData out;
  out.centers.resize(p.clusters, p.dim);
  for (Index c = 0; c < p.clusters; ++c) {
    for (Index j = 0; j < p.dim; ++j) out.centers(c, j) = normal(rng);
    out.centers.row(c).normalize();
  }
  auto draw = [&](Index count, Matrix& x, std::vector<int>& labels) {
    x.resize(count, p.dim);
    labels.resize(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
      const auto c = static_cast<int>(i % p.clusters);
      labels[static_cast<std::size_t>(i)] = c;
      for (Index j = 0; j < p.dim; ++j) x(i, j) = out.centers(c, j) + p.sigma * normal(rng);
    }
  };
  draw(p.train, out.train, out.train_labels);
  draw(p.queries, out.queries, out.query_labels);
  return out;
}

}  // namespace dsch
