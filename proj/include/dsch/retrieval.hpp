#pragma once

// Hamming-ranking evaluation of binary codes against multi-hot labels.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dsch/encoder.hpp"

namespace dsch {

/// n x c multi-hot labels, packed one bit per class.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::size_t count, std::size_t classes);

  /// One list of class indices per sample. `classes` = 0 infers max index + 1.
  static LabelSet from_lists(const std::vector<std::vector<int>>& lists, std::size_t classes = 0);
  /// Single-label samples.
  static LabelSet from_classes(std::span<const int> classes, std::size_t class_count = 0);

  std::size_t size() const { return count_; }
  std::size_t classes() const { return classes_; }
  bool has(std::size_t row, std::size_t cls) const;
  void set(std::size_t row, std::size_t cls);
  std::span<const std::uint64_t> row_words(std::size_t row) const;
  std::vector<std::vector<int>> to_lists() const;

 private:
  std::size_t count_ = 0;
  std::size_t classes_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> data_;
};

/// Number of disagreeing bits between two packed codes of length `bits`.
std::size_t hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b, std::size_t bits);
std::size_t hamming_distance(const BinaryCodes& a, std::size_t i, const BinaryCodes& b, std::size_t j);

/// 1 iff the label rows share a class.
int relevance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
int relevance(const LabelSet& a, std::size_t i, const LabelSet& b, std::size_t j);

/// Database indices ordered by Hamming distance, ties by ascending index.
/// `skip` (if < database size) is left out of the ranking.
std::vector<std::size_t> hamming_ranking(const BinaryCodes& queries, std::size_t q, const BinaryCodes& database,
                                         std::size_t skip = static_cast<std::size_t>(-1));

/// Mean over relevant ranks of precision-so-far; 0 when nothing is relevant.
double average_precision(std::span<const int> relevant_in_rank_order);

struct LabeledCodes {
  const BinaryCodes& codes;
  const LabelSet& labels;
};

struct EvalOptions {
  std::size_t map_k = 5000;
  std::vector<std::size_t> precision_ks{100, 500, 1000, 5000};
  /// Leave query i's own row out of its ranking (query set == database).
  bool exclude_self = false;
};

double map_at_k(const LabeledCodes& queries, const LabeledCodes& database, std::size_t k, bool exclude_self = false);

std::vector<std::pair<std::size_t, double>> precision_at_k(const LabeledCodes& queries, const LabeledCodes& database,
                                                           std::span<const std::size_t> ks, bool exclude_self = false);

/// (recall, precision) at every Hamming radius 0..r, micro-averaged over queries.
/// Empty retrieval counts as precision 1.
std::vector<std::pair<double, double>> pr_curve(const LabeledCodes& queries, const LabeledCodes& database,
                                                bool exclude_self = false);

struct RetrievalReport {
  double map_at_k = 0.0;
  std::size_t k = 0;
  std::vector<std::pair<std::size_t, double>> precision_at_k;
  std::vector<std::pair<double, double>> pr_curve;
  std::size_t query_count = 0;
  std::size_t database_count = 0;
};

RetrievalReport evaluate(const LabeledCodes& queries, const LabeledCodes& database, const EvalOptions& options = {});

/// Uniform random sign codes.
BinaryCodes random_codes(std::size_t count, std::size_t bits, std::uint64_t seed);

}  // namespace dsch
