#include "dsch/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <random>

namespace dsch {

namespace {

Matrix glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(fan_in, fan_out);
  // Fill row-major so the draw order matches the persisted layout.
  for (Index i = 0; i < fan_in; ++i)
    for (Index j = 0; j < fan_out; ++j) w(i, j) = dist(rng);
  return w;
}

Matrix add_bias(Matrix m, const Matrix& bias) {
  m.rowwise() += bias.row(0);
  return m;
}

void check_features(const HashModel& model, const Matrix& features) {
  if (features.cols() != model.input_dim()) {
    throw ShapeError("encoder: features " + shape_string(features) + " but model expects " +
                     std::to_string(model.input_dim()) + " columns");
  }
}

}  // namespace

bool HashModel::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() && feature_mean.allFinite() &&
         feature_scale.allFinite();
}

bool operator==(const HashModel& a, const HashModel& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
  };
  return same(a.w1, b.w1) && same(a.b1, b.b1) && same(a.w2, b.w2) && same(a.b2, b.b2) &&
         same(a.feature_mean, b.feature_mean) && same(a.feature_scale, b.feature_scale);
}

HashModel init_model(Index input_dim, Index code_length, std::uint64_t seed) {
  if (input_dim < 1 || code_length < 1) {
    throw ContractError("init_model: dimensions must be positive (d=" + std::to_string(input_dim) +
                        ", r=" + std::to_string(code_length) + ")");
  }
  std::mt19937_64 rng(seed);
  HashModel m;
  m.seed = seed;
  m.w1 = glorot_uniform(input_dim, kHiddenUnits, rng);
  m.b1 = Matrix::Zero(1, kHiddenUnits);
  m.w2 = glorot_uniform(kHiddenUnits, code_length, rng);
  m.b2 = Matrix::Zero(1, code_length);
  m.feature_mean = RowVector::Zero(input_dim);
  m.feature_scale = RowVector::Ones(input_dim);
  return m;
}

void fit_standardization(HashModel& model, const Matrix& features) {
  check_features(model, features);
  if (features.rows() == 0) throw ContractError("fit_standardization: empty feature set");
  const RowVector mean = features.colwise().mean();
  RowVector scale(features.cols());
  const double n = static_cast<double>(features.rows());
  for (Index j = 0; j < features.cols(); ++j) {
    const double var = (features.col(j).array() - mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    scale(j) = sd > 1e-12 ? sd : 1.0;
  }
  model.feature_mean = mean;
  model.feature_scale = scale;
}

Matrix standardize(const HashModel& model, const Matrix& features) {
  check_features(model, features);
  Matrix out = features.rowwise() - model.feature_mean;
  out.array().rowwise() /= model.feature_scale.array();
  return out;
}

Matrix encode_logits(const HashModel& model, const Matrix& features) {
  const Matrix x = standardize(model, features);
  const Matrix hidden = add_bias(matmul(x, model.w1), model.b1).cwiseMax(0.0);
  return add_bias(matmul(hidden, model.w2), model.b2);
}

CodeMatrix encode_relaxed(const HashModel& model, const Matrix& features) {
  return encode_logits(model, features).array().tanh().matrix();
}

TapedModel TapedModel::bind(ad::Tape& tape, const HashModel& model) {
  return {tape.parameter_ref(model.w1), tape.parameter_ref(model.b1), tape.parameter_ref(model.w2),
          tape.parameter_ref(model.b2)};
}

ad::Var encode_relaxed(const TapedModel& model, const ad::Var& standardized) {
  const ad::Var hidden = ad::relu(ad::add_row_broadcast(ad::matmul(standardized, model.w1), model.b1));
  return ad::tanh(ad::add_row_broadcast(ad::matmul(hidden, model.w2), model.b2));
}

BinaryCodes::BinaryCodes(std::size_t count, std::size_t code_length)
    : count_(count), bits_(code_length), words_((code_length + 63) / 64), data_(count * words_, 0) {
  if (code_length == 0) throw ContractError("BinaryCodes: code length must be positive");
}

BinaryCodes BinaryCodes::from_values(const Matrix& values) {
  BinaryCodes codes(static_cast<std::size_t>(values.rows()), static_cast<std::size_t>(values.cols()));
  for (Index i = 0; i < values.rows(); ++i)
    for (Index k = 0; k < values.cols(); ++k)
      codes.set(static_cast<std::size_t>(i), static_cast<std::size_t>(k), values(i, k) >= 0.0);
  return codes;
}

int BinaryCodes::code(std::size_t row, std::size_t bit) const {
  const std::uint64_t w = data_[row * words_ + bit / 64];
  return ((w >> (bit % 64)) & 1u) ? 1 : -1;
}

void BinaryCodes::set(std::size_t row, std::size_t bit, bool positive) {
  std::uint64_t& w = data_[row * words_ + bit / 64];
  const std::uint64_t mask = std::uint64_t{1} << (bit % 64);
  w = positive ? (w | mask) : (w & ~mask);
}

std::span<const std::uint64_t> BinaryCodes::row_words(std::size_t row) const {
  return {data_.data() + row * words_, words_};
}

std::vector<std::uint8_t> BinaryCodes::row_bytes(std::size_t row) const {
  std::vector<std::uint8_t> out(bytes_per_row());
  const auto words = row_words(row);
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b] = static_cast<std::uint8_t>((words[b / 8] >> (8 * (b % 8))) & 0xFFu);
  }
  return out;
}

void BinaryCodes::set_row_bytes(std::size_t row, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != bytes_per_row()) throw ShapeError("BinaryCodes::set_row_bytes: wrong byte count");
  std::uint64_t* words = data_.data() + row * words_;
  std::fill(words, words + words_, 0);
  for (std::size_t b = 0; b < bytes.size(); ++b) {
    words[b / 8] |= static_cast<std::uint64_t>(bytes[b]) << (8 * (b % 8));
  }
  // Padding bits past the code length stay zero.
  if (bits_ % 64 != 0) words[words_ - 1] &= (std::uint64_t{1} << (bits_ % 64)) - 1;
}

BinaryCodes BinaryCodes::select(std::span<const std::size_t> indices) const {
  BinaryCodes out(indices.size(), bits_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = row_words(indices[i]);
    std::copy(src.begin(), src.end(), out.data_.begin() + static_cast<std::ptrdiff_t>(i * words_));
  }
  return out;
}

Matrix BinaryCodes::to_signs() const {
  Matrix m(static_cast<Index>(count_), static_cast<Index>(bits_));
  for (std::size_t i = 0; i < count_; ++i)
    for (std::size_t k = 0; k < bits_; ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = code(i, k);
  return m;
}

BinaryCodes encode_binary(const HashModel& model, const Matrix& features) {
  return BinaryCodes::from_values(encode_logits(model, features));
}

}  // namespace dsch
