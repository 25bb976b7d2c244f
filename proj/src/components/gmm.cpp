#include <algorithm>
#include <cmath>
#include <numeric>

#include "dsch/components.hpp"

namespace dsch {

namespace {

Matrix covariance_of(const Matrix& points, const Vector& weights, const RowVector& mean, double total, bool diagonal) {
  const Matrix centered = points.rowwise() - mean;
  Matrix cov = (centered.array().colwise() * weights.array()).matrix().transpose() * centered;
  cov /= total;
  cov = 0.5 * (cov + cov.transpose()).eval();
  if (diagonal) cov = Matrix(cov.diagonal().asDiagonal());
  return cov;
}

Matrix global_covariance(const Matrix& codes, bool diagonal) {
  const RowVector mean = codes.colwise().mean();
  return covariance_of(codes, Vector::Ones(codes.rows()), mean, static_cast<double>(codes.rows()), diagonal);
}

/// log(pi_j) + log N(h_i | mu_j, Sigma_j + ridge), samples x components.
Matrix log_joint(const CodeMatrix& codes, const FineLevel& fine) {
  if (codes.cols() != fine.dim()) {
    throw ShapeError("gmm: codes " + shape_string(codes) + " vs means " + shape_string(fine.means));
  }
  const Index m = fine.count();
  Matrix out(codes.rows(), m);
  for (Index j = 0; j < m; ++j) {
    const GaussianFactor<double> g(fine.means.row(j).transpose(),
                                   cholesky_regularized(fine.covariances[static_cast<std::size_t>(j)]));
    out.col(j) = g.logpdf_rows(codes).array() + std::log(fine.priors(j));
  }
  return out;
}

/// Normalizes each row of log-joint values in place to responsibilities and
/// returns the per-row log evidence.
Vector normalize_rows(Matrix& logp) {
  Vector evidence(logp.rows());
  for (Index i = 0; i < logp.rows(); ++i) {
    const double lse = log_sum_exp(logp.row(i));
    evidence(i) = lse;
    logp.row(i) = (logp.row(i).array() - lse).exp();
    // Fold the rounding residual into the largest entry (one correction, then
    // ulp steps) so the row sums to exactly 1 in ascending order; chained
    // coarse sums then stay exact.
    Index top = 0;
    logp.row(i).maxCoeff(&top);
    for (int pass = 0; pass < 16; ++pass) {
      double s = 0.0;
      for (Index j = 0; j < logp.cols(); ++j) s += logp(i, j);
      if (s == 1.0) break;
      if (pass == 0) {
        logp(i, top) += 1.0 - s;
      } else {
        logp(i, top) = std::nextafter(logp(i, top), s > 1.0 ? 0.0 : 2.0);
      }
    }
  }
  return evidence;
}

}  // namespace

double gmm_log_likelihood(const CodeMatrix& codes, const FineLevel& fine) {
  Matrix logp = log_joint(codes, fine);
  return normalize_rows(logp).sum();
}

AssignmentMatrix fine_assignments(const CodeMatrix& codes, const FineLevel& fine) {
  Matrix logp = log_joint(codes, fine);
  normalize_rows(logp);
  return logp;
}

FineLevel fit_gmm(const CodeMatrix& codes, Index m1, std::uint64_t seed, const GmmOptions& options) {
  const Index n = codes.rows();
  const Index r = codes.cols();
  if (m1 < 1 || n < m1) {
    throw ContractError("fit_gmm: need n >= m1 >= 1 (n=" + std::to_string(n) + ", m1=" + std::to_string(m1) + ")");
  }
  if (!codes.allFinite()) throw NumericError("fit_gmm: codes contain non-finite values");

  const Matrix global_cov = global_covariance(codes, options.diagonal);
  FineLevel fine;
  if (options.warm_start) {
    const FineLevel& w = *options.warm_start;
    if (w.count() != m1 || w.dim() != r) throw ShapeError("fit_gmm: warm start has mismatched shape");
    fine.priors = w.priors;
    fine.means = w.means;
    fine.covariances = w.covariances;
  } else {
    const std::vector<Index> seeds = kmeans_plus_plus(codes, m1, seed);
    fine.means.resize(m1, r);
    for (Index j = 0; j < m1; ++j) fine.means.row(j) = codes.row(seeds[static_cast<std::size_t>(j)]);
    fine.covariances.assign(static_cast<std::size_t>(m1), global_cov);
    fine.priors = Vector::Constant(m1, 1.0 / static_cast<double>(m1));
  }

  const double dead_mass = 1e-8 * static_cast<double>(n);
  for (int it = 0;; ++it) {
    // E-step.
    Matrix resp = log_joint(codes, fine);
    const Vector evidence = normalize_rows(resp);
    const double ll = evidence.sum();
    if (!std::isfinite(ll)) throw NumericError("fit_gmm: log-likelihood became non-finite");
    const bool converged =
        !fine.loglik_history.empty() && (ll - fine.loglik_history.back()) < options.tolerance * std::abs(fine.loglik_history.back());
    fine.loglik_history.push_back(ll);
    if (converged || it == options.max_iterations) break;

    // M-step.
    const Vector mass = resp.colwise().sum().transpose();
    std::vector<Index> dead;
    for (Index j = 0; j < m1; ++j) {
      if (mass(j) < dead_mass) {
        dead.push_back(j);
        continue;
      }
      const Vector w = resp.col(j);
      fine.means.row(j) = (w.transpose() * codes) / mass(j);
      fine.covariances[static_cast<std::size_t>(j)] = covariance_of(codes, w, fine.means.row(j), mass(j), options.diagonal);
      fine.priors(j) = mass(j) / static_cast<double>(n);
    }
    if (!dead.empty()) {
      // Re-seed collapsed components at the worst-explained samples.
      std::vector<Index> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), Index{0});
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return evidence(a) < evidence(b); });
      const double revived = static_cast<double>(dead.size()) / static_cast<double>(m1);
      double live_total = 0.0;
      for (Index j = 0; j < m1; ++j)
        if (std::find(dead.begin(), dead.end(), j) == dead.end()) live_total += fine.priors(j);
      for (Index j = 0; j < m1; ++j) {
        if (std::find(dead.begin(), dead.end(), j) == dead.end())
          fine.priors(j) = live_total > 0.0 ? fine.priors(j) / live_total * (1.0 - revived) : 0.0;
      }
      for (std::size_t k = 0; k < dead.size(); ++k) {
        const Index j = dead[k];
        fine.means.row(j) = codes.row(order[k % order.size()]);
        fine.covariances[static_cast<std::size_t>(j)] = global_cov;
        fine.priors(j) = 1.0 / static_cast<double>(m1);
      }
      fine.repaired_at.push_back(it);
    }
    fine.priors /= fine.priors.sum();
    fine.iterations = it + 1;
  }
  return fine;
}

}  // namespace dsch
