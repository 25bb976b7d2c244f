#pragma once

// Alternating optimization: each epoch rebuilds the component structure from
// codes of the unaugmented training set (E-step), then runs one shuffled pass
// of Adam over mini-batches of two augmented views (M-step).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsch/components.hpp"
#include "dsch/encoder.hpp"
#include "dsch/losses.hpp"
#include "dsch/retrieval.hpp"

namespace dsch {

/// Loss composition for ablations. Base is the two-view InfoNCE baseline;
/// the others add instance correlation, then fine, then coarse component terms.
enum class Variant { Base, BaseIC, BaseICCCF, Full };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct TrainConfig {
  Index code_length = 32;
  Index m1 = 1000;
  Index m2 = 100;
  double tau = 1.0;
  double lambda = 0.1;
  int epochs = 100;
  Index batch_size = 128;
  double learning_rate = 5e-4;
  std::uint64_t seed = 0;
  double noise_scale = 0.1;
  double mask_rate = 0.1;
  bool warm_start = false;
  bool diagonal_covariance = false;
  Variant variant = Variant::Full;
  /// When false, per-epoch timings are logged as 0 for byte-stable logs.
  bool record_timings = true;

  void validate() const;
};

struct OptimizerState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerState zeros_like(std::span<const Matrix* const> params);
};

/// One bias-corrected Adam update of every parameter block.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, OptimizerState& state, double eta);

struct Views {
  Matrix a;
  Matrix b;
};

/// Two independent views: additive Gaussian noise, then entries zeroed with
/// probability `mask_rate`.
Views augment(const Matrix& features, double noise_scale, double mask_rate, std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_l1 = 0.0;
  double loss_l2 = 0.0;
  std::optional<double> gmm_loglik;
  double estep_seconds = 0.0;
  double mstep_seconds = 0.0;
};

/// Raised by the divergence guard; carries the offending batch.
class DivergenceError : public NumericError {
 public:
  DivergenceError(int epoch, std::size_t batch, double loss, std::vector<std::size_t> indices);

  int epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }
  double loss() const { return loss_; }
  const std::vector<std::size_t>& indices() const { return indices_; }

 private:
  int epoch_;
  std::size_t batch_;
  double loss_;
  std::vector<std::size_t> indices_;
};

struct TrainResult {
  HashModel model;
  std::vector<EpochRecord> log;
  BinaryCodes codes;  // codes of the training features under the final model
};

using EpochObserver = std::function<void(const EpochRecord&)>;

TrainResult run_em(const Matrix& features, const TrainConfig& config, const EpochObserver& observer = {});

/// Mini-batch partition of a permutation; a trailing batch of one joins the previous batch.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order, Index batch_size);

/// Train `variant` on `train`, then rank `queries` against the training set.
RetrievalReport ablation_run(const Matrix& train, const LabelSet& train_labels, const Matrix& queries,
                             const LabelSet& query_labels, TrainConfig config, Variant variant,
                             const EvalOptions& eval = {});

}  // namespace dsch
