#include <chrono>

#include "dsch/components.hpp"
#include "dsch/seeds.hpp"

namespace dsch {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::size_t bytes_of(const Matrix& m) { return sizeof(double) * static_cast<std::size_t>(m.size()); }

}  // namespace

std::size_t ComponentStructure::footprint_bytes() const {
  std::size_t total = bytes_of(fine_assign) + bytes_of(coarse_assign) + bytes_of(fine.means) +
                      bytes_of(coarse.means) + bytes_of(fine_signs) + bytes_of(coarse_signs) +
                      sizeof(double) * static_cast<std::size_t>(fine.priors.size() + coarse.priors.size()) +
                      sizeof(int) * coarse.membership.size();
  for (const Matrix& c : fine.covariances) total += bytes_of(c);
  return total;
}

ComponentStructure build_structure(const CodeMatrix& codes, Index m1, Index m2, std::uint64_t seed,
                                   const StructureOptions& options) {
  if (!(codes.rows() >= m1 && m1 >= m2 && m2 >= 1)) {
    throw ContractError("build_structure: need n >= m1 >= m2 >= 1 (n=" + std::to_string(codes.rows()) +
                        ", m1=" + std::to_string(m1) + ", m2=" + std::to_string(m2) + ")");
  }
  const auto start = std::chrono::steady_clock::now();
  ComponentStructure s;

  auto t = std::chrono::steady_clock::now();
  s.fine = fit_gmm(codes, m1, derive_seed(seed, SeedStream::Gmm), options.gmm);
  s.fine_assign = fine_assignments(codes, s.fine);
  s.stats.gmm_seconds = seconds_since(t);

  t = std::chrono::steady_clock::now();
  s.coarse = fit_coarse(s.fine, m2, derive_seed(seed, SeedStream::Kmeans), options.kmeans);
  s.stats.kmeans_seconds = seconds_since(t);

  t = std::chrono::steady_clock::now();
  s.coarse_assign = coarse_assignments(s.fine_assign, s.coarse);
  s.stats.chain_seconds = seconds_since(t);

  s.fine_signs = discretize_centers(s.fine.means);
  s.coarse_signs = discretize_centers(s.coarse.means);

  const auto n = static_cast<std::uint64_t>(codes.rows());
  const auto r = static_cast<std::uint64_t>(codes.cols());
  const auto um1 = static_cast<std::uint64_t>(m1);
  const auto um2 = static_cast<std::uint64_t>(m2);
  s.stats.gmm_iterations = s.fine.iterations;
  s.stats.kmeans_iterations = s.coarse.iterations;
  s.stats.gmm_ops = static_cast<std::uint64_t>(s.fine.loglik_history.size()) * n * um1 * r * r;
  s.stats.kmeans_ops = static_cast<std::uint64_t>(s.coarse.sse_history.size()) * um1 * um2 * r;
  s.stats.chain_ops = n * um1;
  s.stats.total_seconds = seconds_since(start);
  return s;
}

}  // namespace dsch
