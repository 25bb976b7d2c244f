#pragma once

// M-step objectives over two augmented code views of one mini-batch.

#include <span>
#include <vector>

#include "dsch/components.hpp"
#include "dsch/tape.hpp"

namespace dsch {

/// Cosine similarity of fine-assignment vectors and the normalized pair
/// weights alpha = s / (4 * sum(s)).
struct PairWeights {
  Matrix similarity;
  Matrix alpha;
};

PairWeights pair_similarity(const AssignmentMatrix& fine_assign);

/// alpha restricted to the batch rows and renormalized so it sums to 1/4.
Matrix batch_alpha(const Matrix& similarity, std::span<const std::size_t> indices);

/// beta_ij = pi_j * p_ij for the batch rows.
Matrix component_weights(const AssignmentMatrix& assign, const Vector& priors, std::span<const std::size_t> indices);

/// Standardized feature views of one batch; both derive from the same rows.
struct AugmentedBatch {
  std::vector<std::size_t> indices;
  Matrix view_a;
  Matrix view_b;
};

/// Taped relaxed codes of the two views (batch x r each).
struct CodeViews {
  ad::Var a;
  ad::Var b;
};

/// Per-sample two-view InfoNCE: positives are the two views of one sample,
/// negatives every view of every other sample. Mean over samples of l^a + l^b.
ad::Var loss_baseline(const CodeViews& views, double tau);

/// Pair-weighted contrastive loss with a single denominator over every
/// view/sample combination (self pairs included).
ad::Var loss_instance(const CodeViews& views, const Matrix& alpha, double tau);

struct ComponentLevels {
  bool fine = true;
  bool coarse = true;
};

/// -sum_v sum_l sum_ij beta_ij log softmax_j(cos(h_i^v, sign(mu_j)) / tau).
ad::Var loss_component(const CodeViews& views, const ComponentStructure& structure,
                       std::span<const std::size_t> indices, double tau, ComponentLevels levels = {});

struct LossTerms {
  ad::Var total;
  double instance = 0.0;
  double component = 0.0;
};

/// instance + lambda * component. The component term is skipped when lambda
/// is zero or no level is enabled.
LossTerms total_loss(const CodeViews& views, const Matrix& alpha, const ComponentStructure& structure,
                     std::span<const std::size_t> indices, double tau, double lambda, ComponentLevels levels = {});

}  // namespace dsch
