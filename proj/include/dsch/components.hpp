#pragma once

// Two-level semantic component structure over relaxed codes: a Gaussian
// mixture at the fine level, k-means over the fine means at the coarse level,
// and sample-to-coarse assignments obtained by summing fine responsibilities
// through the membership map.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dsch/encoder.hpp"
#include "dsch/ndmath.hpp"

namespace dsch {

/// Row-stochastic matrix of posterior responsibilities (samples x components).
using AssignmentMatrix = Matrix;

struct FineLevel {
  Vector priors;                    // m1
  Matrix means;                     // m1 x r
  std::vector<Matrix> covariances;  // m1 of r x r

  // Fit diagnostics.
  std::vector<double> loglik_history;  // total data log-likelihood per EM iteration
  std::vector<int> repaired_at;        // iterations in which a component was re-seeded
  int iterations = 0;

  Index count() const { return means.rows(); }
  Index dim() const { return means.cols(); }
  double final_loglik() const { return loglik_history.empty() ? 0.0 : loglik_history.back(); }
};

struct CoarseLevel {
  Vector priors;                 // m2, all 1/m2
  Matrix means;                  // m2 x r
  std::vector<int> membership;   // m1 entries in [0, m2)
  std::vector<double> sse_history;
  int iterations = 0;

  Index count() const { return means.rows(); }
};

struct GmmOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  // relative log-likelihood improvement
  bool diagonal = false;
  /// Starting point instead of k-means++ seeding (warm start).
  const FineLevel* warm_start = nullptr;
};

struct KmeansOptions {
  int max_iterations = 300;
};

/// EM fit of an m1-component full-covariance Gaussian mixture.
FineLevel fit_gmm(const CodeMatrix& codes, Index m1, std::uint64_t seed, const GmmOptions& options = {});

/// Total log-likelihood of `codes` under the mixture.
double gmm_log_likelihood(const CodeMatrix& codes, const FineLevel& fine);

AssignmentMatrix fine_assignments(const CodeMatrix& codes, const FineLevel& fine);

/// k-means result on arbitrary points; membership has one entry per row.
struct KmeansResult {
  Matrix centers;
  std::vector<int> membership;
  std::vector<double> sse_history;
  int iterations = 0;
};

KmeansResult kmeans(const Matrix& points, Index k, std::uint64_t seed, const KmeansOptions& options = {});

/// k-means++ seeding; returns the chosen row indices in pick order.
std::vector<Index> kmeans_plus_plus(const Matrix& points, Index k, std::uint64_t seed);

CoarseLevel fit_coarse(const FineLevel& fine, Index m2, std::uint64_t seed, const KmeansOptions& options = {});

/// Member-average of fine means per coarse component.
Matrix coarse_means(const Matrix& fine_means, std::span<const int> membership, Index m2);

/// 0/1 indicator M (m1 x m2) with M(j, membership[j]) = 1.
Matrix membership_matrix(std::span<const int> membership, Index m2);

AssignmentMatrix coarse_assignments(const AssignmentMatrix& fine, const CoarseLevel& coarse);

/// sign() with sign(0) = -1, applied to component centers.
Matrix discretize_centers(const Matrix& means);

struct StructureStats {
  double gmm_seconds = 0.0;
  double kmeans_seconds = 0.0;
  double chain_seconds = 0.0;
  double total_seconds = 0.0;
  int gmm_iterations = 0;
  int kmeans_iterations = 0;
  // Dominant-term operation counts: n*m1*r^2 per GMM iteration (density +
  // covariance update), m1*m2*r per k-means iteration, n*m1 for the chain map.
  std::uint64_t gmm_ops = 0;
  std::uint64_t kmeans_ops = 0;
  std::uint64_t chain_ops = 0;
};

struct StructureOptions {
  GmmOptions gmm;
  KmeansOptions kmeans;
};

struct ComponentStructure {
  FineLevel fine;
  CoarseLevel coarse;
  AssignmentMatrix fine_assign;    // n x m1
  AssignmentMatrix coarse_assign;  // n x m2
  Matrix fine_signs;               // sign(mu^(1)), m1 x r
  Matrix coarse_signs;             // sign(mu^(2)), m2 x r
  StructureStats stats;

  /// Bytes held by assignment, mean, and covariance storage.
  std::size_t footprint_bytes() const;
};

ComponentStructure build_structure(const CodeMatrix& codes, Index m1, Index m2, std::uint64_t seed,
                                   const StructureOptions& options = {});

}  // namespace dsch
