#include "dsch/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "dsch/seeds.hpp"

namespace dsch {

namespace {

constexpr double kDivergenceLimit = 1e6;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  return out;
}

/// Pair weights over the batch rows, renormalized to sum 1/4. Equivalent to
/// restricting the full-dataset similarity to the batch.
Matrix alpha_from_assignments(const AssignmentMatrix& fine_assign, std::span<const std::size_t> rows) {
  const Matrix s = pair_similarity(gather_rows(fine_assign, rows)).similarity;
  return s / (4.0 * s.sum());
}

ComponentLevels levels_for(Variant v) {
  switch (v) {
    case Variant::Base:
    case Variant::BaseIC:
      return {false, false};
    case Variant::BaseICCCF:
      return {true, false};
    case Variant::Full:
      return {true, true};
  }
  return {};
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Base:
      return "Base";
    case Variant::BaseIC:
      return "Base+IC";
    case Variant::BaseICCCF:
      return "Base+IC+CCF";
    case Variant::Full:
      return "Full";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::Base, Variant::BaseIC, Variant::BaseICCCF, Variant::Full}) {
    if (to_string(v) == name) return v;
  }
  throw ContractError("unknown variant '" + name + "' (expected Base, Base+IC, Base+IC+CCF or Full)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ContractError("config: " + what); };
  if (code_length < 1) fail("r must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (!(m1 >= m2 && m2 >= 1)) fail("need m1 >= m2 >= 1");
  if (!(tau > 0.0)) fail("tau must be > 0");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(noise_scale >= 0.0)) fail("noise_scale must be >= 0");
  if (!(mask_rate >= 0.0 && mask_rate < 1.0)) fail("mask_rate must be in [0, 1)");
}

OptimizerState OptimizerState::zeros_like(std::span<const Matrix* const> params) {
  OptimizerState s;
  for (const Matrix* p : params) {
    s.first.push_back(Matrix::Zero(p->rows(), p->cols()));
    s.second.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  return s;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, OptimizerState& state, double eta) {
  if (params.size() != grads.size() || params.size() != state.first.size()) {
    throw ContractError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->rows() != grads[k].rows() || params[k]->cols() != grads[k].cols() ||
        state.first[k].rows() != grads[k].rows() || state.first[k].cols() != grads[k].cols()) {
      throw ContractError("adam_step: block " + std::to_string(k) + " parameter " + shape_string(*params[k]) +
                          " vs gradient " + shape_string(grads[k]));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& m = state.first[k];
    Matrix& v = state.second[k];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[k];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[k].cwiseAbs2();
    params[k]->array() -= eta * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  }
}

Views augment(const Matrix& features, double noise_scale, double mask_rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto one_view = [&]() {
    Matrix v = features;
    if (noise_scale == 0.0 && mask_rate == 0.0) return v;
    for (Index i = 0; i < v.rows(); ++i) {
      for (Index j = 0; j < v.cols(); ++j) {
        if (noise_scale > 0.0) v(i, j) += noise_scale * noise(rng);
        if (mask_rate > 0.0 && coin(rng) < mask_rate) v(i, j) = 0.0;
      }
    }
    return v;
  };
  Views out;
  out.a = one_view();
  out.b = one_view();
  return out;
}

DivergenceError::DivergenceError(int epoch, std::size_t batch, double loss, std::vector<std::size_t> indices)
    : NumericError([&] {
        std::ostringstream os;
        os << "training diverged at epoch " << epoch << ", batch " << batch << " (loss " << loss << ")";
        return os.str();
      }()),
      epoch_(epoch),
      batch_(batch),
      loss_(loss),
      indices_(std::move(indices)) {}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order, Index batch_size) {
  if (batch_size < 2) throw ContractError("make_batches: batch size must be >= 2");
  std::vector<std::vector<std::size_t>> batches;
  const auto b = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < order.size(); start += b) {
    const std::size_t end = std::min(order.size(), start + b);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() < 2) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

TrainResult run_em(const Matrix& features, const TrainConfig& config, const EpochObserver& observer) {
  config.validate();
  const Index n = features.rows();
  if (n < config.m1) {
    throw ContractError("run_em: need n >= m1 (n=" + std::to_string(n) + ", m1=" + std::to_string(config.m1) + ")");
  }
  if (n < 2) throw ContractError("run_em: need at least 2 samples");
  if (!features.allFinite()) throw ContractError("run_em: features contain non-finite values");

  TrainResult result;
  HashModel& model = result.model;
  model = init_model(features.cols(), config.code_length, derive_seed(config.seed, SeedStream::Init));
  fit_standardization(model, features);
  const Matrix standardized = standardize(model, features);

  const auto params = model.parameters();
  OptimizerState opt = OptimizerState::zeros_like(std::span<const Matrix* const>(params.data(), params.size()));
  const ComponentLevels levels = levels_for(config.variant);
  const bool needs_structure = config.variant != Variant::Base;

  StructureOptions sopts;
  sopts.gmm.diagonal = config.diagonal_covariance;
  std::optional<FineLevel> previous_fine;

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;

    // E-step on codes of the unaugmented features.
    auto t0 = std::chrono::steady_clock::now();
    ComponentStructure structure;
    if (needs_structure) {
      const CodeMatrix codes = encode_relaxed(model, features);
      sopts.gmm.warm_start = (config.warm_start && previous_fine) ? &*previous_fine : nullptr;
      structure = build_structure(codes, config.m1, config.m2, derive_seed(config.seed, SeedStream::Gmm, epoch), sopts);
      rec.gmm_loglik = structure.fine.final_loglik();
      if (config.warm_start) previous_fine = structure.fine;
    }
    const double estep = seconds_since(t0);

    // M-step.
    t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, SeedStream::Shuffle, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const auto batches = make_batches(order, config.batch_size);

    double sum_total = 0.0, sum_l1 = 0.0, sum_l2 = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      const Views views = augment(gather_rows(standardized, idx), config.noise_scale, config.mask_rate,
                                  derive_seed(config.seed, SeedStream::Augment, epoch, bi));

      ad::Tape tape;
      const TapedModel taped = TapedModel::bind(tape, model);
      const CodeViews codes{encode_relaxed(taped, tape.constant(views.a)), encode_relaxed(taped, tape.constant(views.b))};

      ad::Var loss;
      double l1 = 0.0, l2 = 0.0;
      if (config.variant == Variant::Base) {
        loss = loss_baseline(codes, config.tau);
        l1 = loss.scalar();
      } else {
        const Matrix alpha = alpha_from_assignments(structure.fine_assign, idx);
        const LossTerms terms = total_loss(codes, alpha, structure, idx, config.tau, config.lambda, levels);
        loss = terms.total;
        l1 = terms.instance;
        l2 = terms.component;
      }
      const double value = loss.scalar();
      if (!std::isfinite(value) || value > kDivergenceLimit) throw DivergenceError(epoch, bi, value, idx);

      const ad::Gradients grads = tape.backward(loss);
      adam_step(std::span<Matrix* const>(params.data(), params.size()), grads.all(), opt, config.learning_rate);
      sum_total += value;
      sum_l1 += l1;
      sum_l2 += l2;
    }
    const double nb = static_cast<double>(batches.size());
    rec.loss_total = sum_total / nb;
    rec.loss_l1 = sum_l1 / nb;
    rec.loss_l2 = sum_l2 / nb;
    const double mstep = seconds_since(t0);
    if (config.record_timings) {
      rec.estep_seconds = estep;
      rec.mstep_seconds = mstep;
    }
    if (!model.all_finite()) throw NumericError("run_em: parameters became non-finite at epoch " + std::to_string(epoch));
    result.log.push_back(rec);
    if (observer) observer(rec);
  }
  result.codes = encode_binary(model, features);
  return result;
}

RetrievalReport ablation_run(const Matrix& train, const LabelSet& train_labels, const Matrix& queries,
                             const LabelSet& query_labels, TrainConfig config, Variant variant, const EvalOptions& eval) {
  config.variant = variant;
  const TrainResult trained = run_em(train, config);
  const BinaryCodes query_codes = encode_binary(trained.model, queries);
  return evaluate({query_codes, query_labels}, {trained.codes, train_labels}, eval);
}

}  // namespace dsch
