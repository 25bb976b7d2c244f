#include "dsch/losses.hpp"

#include <cmath>

namespace dsch {

namespace {

// Logit used to remove an entry from a row softmax; exp() of it underflows to 0.
constexpr double kMaskedLogit = -1e30;

void check_tau(double tau) {
  if (!(tau > 0.0)) throw ContractError("loss: temperature must be positive");
}

void check_views(const CodeViews& views) {
  if (views.a.rows() != views.b.rows() || views.a.cols() != views.b.cols()) {
    throw ShapeError("loss: view shapes differ, " + shape_string(views.a.value()) + " vs " +
                     shape_string(views.b.value()));
  }
}

/// Scaled cosine matrix over the stacked views [a; b], 2b x 2b.
ad::Var stacked_logits(const CodeViews& views, double tau) {
  const ad::Var z = ad::vstack(ad::row_normalize(views.a), ad::row_normalize(views.b));
  return ad::scale(ad::matmul(z, ad::transpose(z)), 1.0 / tau);
}

}  // namespace

PairWeights pair_similarity(const AssignmentMatrix& fine_assign) {
  Vector norms = fine_assign.rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > 0.0)) throw DegenerateInputError("pair_similarity: assignment row " + std::to_string(i) + " is zero");
  }
  const Matrix unit = fine_assign.array().colwise() / norms.array();
  PairWeights w;
  w.similarity = unit * unit.transpose();
  // Symmetric by construction; clamp roundoff into [0, 1].
  w.similarity = (0.5 * (w.similarity + w.similarity.transpose())).cwiseMax(0.0).cwiseMin(1.0);
  w.alpha = w.similarity / (4.0 * w.similarity.sum());
  return w;
}

Matrix batch_alpha(const Matrix& similarity, std::span<const std::size_t> indices) {
  const auto b = static_cast<Index>(indices.size());
  Matrix s(b, b);
  for (Index i = 0; i < b; ++i)
    for (Index j = 0; j < b; ++j)
      s(i, j) = similarity(static_cast<Index>(indices[static_cast<std::size_t>(i)]),
                           static_cast<Index>(indices[static_cast<std::size_t>(j)]));
  const double total = s.sum();
  if (!(total > 0.0)) throw DegenerateInputError("batch_alpha: batch similarities sum to zero");
  return s / (4.0 * total);
}

Matrix component_weights(const AssignmentMatrix& assign, const Vector& priors, std::span<const std::size_t> indices) {
  if (assign.cols() != priors.size()) throw ShapeError("component_weights: assignments vs priors");
  Matrix beta(static_cast<Index>(indices.size()), assign.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    beta.row(static_cast<Index>(i)) = assign.row(static_cast<Index>(indices[i])).cwiseProduct(priors.transpose());
  }
  return beta;
}

ad::Var loss_baseline(const CodeViews& views, double tau) {
  check_tau(tau);
  check_views(views);
  const Index b = views.a.rows();
  if (b < 2) throw ContractError("loss_baseline: batch needs at least 2 samples");

  const ad::Var logits = stacked_logits(views, tau);
  // Anchor row I excludes only its own column; its positive is the other view.
  Matrix mask = Matrix::Zero(2 * b, 2 * b);
  mask.diagonal().setConstant(kMaskedLogit);
  Matrix positives = Matrix::Zero(2 * b, 2 * b);
  for (Index i = 0; i < b; ++i) {
    positives(i, b + i) = 1.0;
    positives(b + i, i) = 1.0;
  }
  const ad::Var logp = ad::log_softmax_rows(ad::add_constant(logits, mask));
  return ad::scale(ad::weighted_sum(logp, positives), -1.0 / static_cast<double>(b));
}

ad::Var loss_instance(const CodeViews& views, const Matrix& alpha, double tau) {
  check_tau(tau);
  check_views(views);
  const Index b = views.a.rows();
  if (alpha.rows() != b || alpha.cols() != b) {
    throw ShapeError("loss_instance: alpha " + shape_string(alpha) + " for batch of " + std::to_string(b));
  }
  const ad::Var logits = stacked_logits(views, tau);
  Matrix weights(2 * b, 2 * b);
  weights << alpha, alpha, alpha, alpha;
  // sum_IJ w_IJ (lse(G) - G_IJ)
  const ad::Var denom = ad::scale(ad::log_sum_exp(logits), weights.sum());
  return denom - ad::weighted_sum(logits, weights);
}

ad::Var loss_component(const CodeViews& views, const ComponentStructure& structure,
                       std::span<const std::size_t> indices, double tau, ComponentLevels levels) {
  check_tau(tau);
  check_views(views);
  if (static_cast<Index>(indices.size()) != views.a.rows()) {
    throw ShapeError("loss_component: " + std::to_string(indices.size()) + " indices for batch of " +
                     std::to_string(views.a.rows()));
  }
  ad::Tape& tape = *views.a.tape();
  const double inv_sqrt_r = 1.0 / std::sqrt(static_cast<double>(views.a.cols()));

  struct Level {
    const Matrix* signs;
    Matrix beta;
  };
  std::vector<Level> active;
  if (levels.fine) {
    active.push_back({&structure.fine_signs, component_weights(structure.fine_assign, structure.fine.priors, indices)});
  }
  if (levels.coarse) {
    active.push_back(
        {&structure.coarse_signs, component_weights(structure.coarse_assign, structure.coarse.priors, indices)});
  }
  if (active.empty()) return tape.constant(Matrix::Zero(1, 1));

  ad::Var total;
  for (const ad::Var& view : {views.a, views.b}) {
    const ad::Var z = ad::row_normalize(view);
    for (const Level& level : active) {
      // Sign vectors have norm sqrt(r), so z . s / sqrt(r) is the cosine.
      const ad::Var centers = tape.constant(level.signs->transpose() * inv_sqrt_r);
      const ad::Var logp = ad::log_softmax_rows(ad::scale(ad::matmul(z, centers), 1.0 / tau));
      const ad::Var term = ad::weighted_sum(logp, level.beta);
      total = total.valid() ? total + term : term;
    }
  }
  return ad::scale(total, -1.0);
}

LossTerms total_loss(const CodeViews& views, const Matrix& alpha, const ComponentStructure& structure,
                     std::span<const std::size_t> indices, double tau, double lambda, ComponentLevels levels) {
  LossTerms out;
  const ad::Var instance = loss_instance(views, alpha, tau);
  out.instance = instance.scalar();
  if (lambda == 0.0 || (!levels.fine && !levels.coarse)) {
    out.total = instance;
    return out;
  }
  const ad::Var component = loss_component(views, structure, indices, tau, levels);
  out.component = component.scalar();
  out.total = instance + ad::scale(component, lambda);
  return out;
}

}  // namespace dsch
