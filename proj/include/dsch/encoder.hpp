#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dsch/ndmath.hpp"
#include "dsch/tape.hpp"

namespace dsch {

inline constexpr Index kHiddenUnits = 1000;

/// Relaxed codes, one row per sample, entries in [-1, 1].
using CodeMatrix = Matrix;

/// Two-layer hash head: tanh(relu(x W1 + b1) W2 + b2) over standardized features.
struct HashModel {
  Matrix w1;  // d x 1000
  Matrix b1;  // 1 x 1000
  Matrix w2;  // 1000 x r
  Matrix b2;  // 1 x r
  RowVector feature_mean;   // 1 x d
  RowVector feature_scale;  // 1 x d, strictly positive
  std::uint64_t seed = 0;

  Index input_dim() const { return w1.rows(); }
  Index code_length() const { return w2.cols(); }

  std::array<Matrix*, 4> parameters() { return {&w1, &b1, &w2, &b2}; }
  std::array<const Matrix*, 4> parameters() const { return {&w1, &b1, &w2, &b2}; }

  bool all_finite() const;
  friend bool operator==(const HashModel& a, const HashModel& b);
};

/// Glorot-uniform weights, zero biases, identity standardization.
HashModel init_model(Index input_dim, Index code_length, std::uint64_t seed);

/// Stores per-dimension mean and standard deviation of `features`. Constant
/// dimensions get scale 1.
void fit_standardization(HashModel& model, const Matrix& features);
Matrix standardize(const HashModel& model, const Matrix& features);

/// Pre-tanh outputs on raw features.
Matrix encode_logits(const HashModel& model, const Matrix& features);
CodeMatrix encode_relaxed(const HashModel& model, const Matrix& features);

/// Model parameters bound to a tape as leaves, in declaration order.
struct TapedModel {
  ad::Var w1, b1, w2, b2;
  static TapedModel bind(ad::Tape& tape, const HashModel& model);
};

/// Taped relaxed codes. `standardized` must already be standardized.
ad::Var encode_relaxed(const TapedModel& model, const ad::Var& standardized);

/// Sign codes stored one bit per entry, +1 as bit 1. Bit k of a row lives in
/// byte k/8 at position k%8.
class BinaryCodes {
 public:
  BinaryCodes() = default;
  BinaryCodes(std::size_t count, std::size_t code_length);

  /// sign(v) per entry with sign(0) = +1.
  static BinaryCodes from_values(const Matrix& values);

  std::size_t size() const { return count_; }
  std::size_t code_length() const { return bits_; }
  std::size_t words_per_row() const { return words_; }
  std::size_t bytes_per_row() const { return (bits_ + 7) / 8; }

  int code(std::size_t row, std::size_t bit) const;
  void set(std::size_t row, std::size_t bit, bool positive);

  std::span<const std::uint64_t> row_words(std::size_t row) const;
  std::vector<std::uint8_t> row_bytes(std::size_t row) const;
  void set_row_bytes(std::size_t row, std::span<const std::uint8_t> bytes);

  /// Rows restricted to `indices`, in that order.
  BinaryCodes select(std::span<const std::size_t> indices) const;
  Matrix to_signs() const;

  friend bool operator==(const BinaryCodes&, const BinaryCodes&) = default;

 private:
  std::size_t count_ = 0;
  std::size_t bits_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> data_;
};

BinaryCodes encode_binary(const HashModel& model, const Matrix& features);

}  // namespace dsch
