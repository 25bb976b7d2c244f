#include <limits>
#include <random>

#include "dsch/components.hpp"

namespace dsch {

namespace {

double squared_distance(const Matrix& a, Index i, const Matrix& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

/// Nearest center per point; the lowest index wins exact ties.
std::vector<int> assign_nearest(const Matrix& points, const Matrix& centers, std::vector<double>& dist) {
  std::vector<int> out(static_cast<std::size_t>(points.rows()));
  dist.assign(out.size(), 0.0);
  for (Index i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = squared_distance(points, i, centers, 0);
    for (Index c = 1; c < centers.rows(); ++c) {
      const double d = squared_distance(points, i, centers, c);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    out[static_cast<std::size_t>(i)] = best;
    dist[static_cast<std::size_t>(i)] = best_d;
  }
  return out;
}

std::vector<Index> cluster_sizes(const std::vector<int>& membership, Index k) {
  std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
  for (int m : membership) ++sizes[static_cast<std::size_t>(m)];
  return sizes;
}

/// Moves the worst-fit point (largest distance, lowest index on ties) from a
/// cluster with more than one member into each empty cluster.
void repair_empty(const Matrix& points, Matrix& centers, std::vector<int>& membership, std::vector<double>& dist) {
  const Index k = centers.rows();
  std::vector<Index> sizes = cluster_sizes(membership, k);
  for (Index c = 0; c < k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] > 0) continue;
    Index worst = -1;
    double worst_d = -1.0;
    for (Index i = 0; i < points.rows(); ++i) {
      const auto owner = static_cast<std::size_t>(membership[static_cast<std::size_t>(i)]);
      if (sizes[owner] <= 1) continue;
      if (dist[static_cast<std::size_t>(i)] > worst_d) {
        worst_d = dist[static_cast<std::size_t>(i)];
        worst = i;
      }
    }
    if (worst < 0) throw NumericError("kmeans: cannot repair empty cluster (k exceeds point count)");
    --sizes[static_cast<std::size_t>(membership[static_cast<std::size_t>(worst)])];
    membership[static_cast<std::size_t>(worst)] = static_cast<int>(c);
    dist[static_cast<std::size_t>(worst)] = 0.0;
    ++sizes[static_cast<std::size_t>(c)];
    centers.row(c) = points.row(worst);
  }
}

double total_sse(const Matrix& points, const Matrix& centers, const std::vector<int>& membership) {
  double s = 0.0;
  for (Index i = 0; i < points.rows(); ++i) s += squared_distance(points, i, centers, membership[static_cast<std::size_t>(i)]);
  return s;
}

}  // namespace

std::vector<Index> kmeans_plus_plus(const Matrix& points, Index k, std::uint64_t seed) {
  const Index n = points.rows();
  if (k < 1 || k > n) {
    throw ContractError("kmeans++: need 1 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  std::mt19937_64 rng(seed);
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  std::vector<bool> taken(static_cast<std::size_t>(n), false);

  const Index first = static_cast<Index>(std::uniform_int_distribution<std::uint64_t>(0, static_cast<std::uint64_t>(n - 1))(rng));
  chosen.push_back(first);
  taken[static_cast<std::size_t>(first)] = true;

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = squared_distance(points, i, points, first);

  while (static_cast<Index>(chosen.size()) < k) {
    double total = 0.0;
    for (Index i = 0; i < n; ++i)
      if (!taken[static_cast<std::size_t>(i)]) total += d2[static_cast<std::size_t>(i)];

    Index pick = -1;
    if (total > 0.0) {
      const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)] || d2[static_cast<std::size_t>(i)] <= 0.0) continue;
        acc += d2[static_cast<std::size_t>(i)];
        pick = i;
        if (acc > u) break;
      }
    }
    if (pick < 0) {
      // All remaining points coincide with chosen centers.
      for (Index i = 0; i < n; ++i) {
        if (!taken[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
      }
    }
    chosen.push_back(pick);
    taken[static_cast<std::size_t>(pick)] = true;
    for (Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], squared_distance(points, i, points, pick));
  }
  return chosen;
}

Matrix coarse_means(const Matrix& fine_means, std::span<const int> membership, Index m2) {
  if (static_cast<Index>(membership.size()) != fine_means.rows()) {
    throw ShapeError("coarse_means: membership length " + std::to_string(membership.size()) + " vs " +
                     std::to_string(fine_means.rows()) + " fine means");
  }
  Matrix sums = Matrix::Zero(m2, fine_means.cols());
  Vector counts = Vector::Zero(m2);
  for (std::size_t j = 0; j < membership.size(); ++j) {
    const int k = membership[j];
    if (k < 0 || k >= m2) throw ContractError("coarse_means: membership out of range");
    sums.row(k) += fine_means.row(static_cast<Index>(j));
    counts(k) += 1.0;
  }
  for (Index k = 0; k < m2; ++k) {
    if (counts(k) == 0.0) throw NumericError("coarse_means: coarse component " + std::to_string(k) + " has no members");
    sums.row(k) /= counts(k);
  }
  return sums;
}

KmeansResult kmeans(const Matrix& points, Index k, std::uint64_t seed, const KmeansOptions& options) {
  const std::vector<Index> seeds = kmeans_plus_plus(points, k, seed);
  Matrix centers(k, points.cols());
  for (Index c = 0; c < k; ++c) centers.row(c) = points.row(seeds[static_cast<std::size_t>(c)]);

  KmeansResult result;
  std::vector<int> membership;
  std::vector<double> dist;
  for (int it = 0; it < options.max_iterations; ++it) {
    std::vector<int> next = assign_nearest(points, centers, dist);
    result.sse_history.push_back(total_sse(points, centers, next));
    const bool changed = next != membership;
    membership = std::move(next);
    if (!changed) break;

    repair_empty(points, centers, membership, dist);
    centers = coarse_means(points, membership, k);
    result.iterations = it + 1;
  }
  repair_empty(points, centers, membership, dist);
  result.centers = coarse_means(points, membership, k);
  result.membership = std::move(membership);
  return result;
}

CoarseLevel fit_coarse(const FineLevel& fine, Index m2, std::uint64_t seed, const KmeansOptions& options) {
  const Index m1 = fine.count();
  if (m2 < 1 || m2 > m1) {
    throw ContractError("fit_coarse: need 1 <= m2 <= m1 (m2=" + std::to_string(m2) + ", m1=" + std::to_string(m1) + ")");
  }
  KmeansResult km = kmeans(fine.means, m2, seed, options);
  CoarseLevel coarse;
  coarse.membership = std::move(km.membership);
  coarse.means = coarse_means(fine.means, coarse.membership, m2);
  coarse.priors = Vector::Constant(m2, 1.0 / static_cast<double>(m2));
  coarse.sse_history = std::move(km.sse_history);
  coarse.iterations = km.iterations;
  return coarse;
}

Matrix membership_matrix(std::span<const int> membership, Index m2) {
  Matrix m = Matrix::Zero(static_cast<Index>(membership.size()), m2);
  for (std::size_t j = 0; j < membership.size(); ++j) {
    if (membership[j] < 0 || membership[j] >= m2) throw ContractError("membership_matrix: index out of range");
    m(static_cast<Index>(j), membership[j]) = 1.0;
  }
  return m;
}

AssignmentMatrix coarse_assignments(const AssignmentMatrix& fine, const CoarseLevel& coarse) {
  if (fine.cols() != static_cast<Index>(coarse.membership.size())) {
    throw ShapeError("coarse_assignments: fine assignments " + shape_string(fine) + " vs membership of " +
                     std::to_string(coarse.membership.size()));
  }
  const Index m2 = coarse.count();
  AssignmentMatrix out = AssignmentMatrix::Zero(fine.rows(), m2);
  for (Index i = 0; i < fine.rows(); ++i)
    for (Index j = 0; j < fine.cols(); ++j) out(i, coarse.membership[static_cast<std::size_t>(j)]) += fine(i, j);
  return out;
}

Matrix discretize_centers(const Matrix& means) {
  return (means.array() > 0.0).select(Matrix::Ones(means.rows(), means.cols()), -1.0);
}

}  // namespace dsch
