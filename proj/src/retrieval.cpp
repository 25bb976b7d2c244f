#include "dsch/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <random>

namespace dsch {

namespace {

void check_pair(const LabeledCodes& queries, const LabeledCodes& database, bool exclude_self) {
  if (database.codes.size() == 0) throw ContractError("retrieval: empty database");
  if (queries.codes.code_length() != database.codes.code_length()) {
    throw ContractError("retrieval: code lengths differ (" + std::to_string(queries.codes.code_length()) + " vs " +
                        std::to_string(database.codes.code_length()) + ")");
  }
  if (queries.labels.size() != queries.codes.size() || database.labels.size() != database.codes.size()) {
    throw ContractError("retrieval: label count does not match code count");
  }
  if (exclude_self && queries.codes.size() != database.codes.size()) {
    throw ContractError("retrieval: self-exclusion requires query set == database");
  }
}

std::size_t skip_for(std::size_t q, bool exclude_self) {
  return exclude_self ? q : std::numeric_limits<std::size_t>::max();
}

}  // namespace

LabelSet::LabelSet(std::size_t count, std::size_t classes)
    : count_(count), classes_(classes), words_((classes + 63) / 64), data_(count * words_, 0) {}

LabelSet LabelSet::from_lists(const std::vector<std::vector<int>>& lists, std::size_t classes) {
  if (classes == 0) {
    for (const auto& row : lists)
      for (int c : row) classes = std::max(classes, static_cast<std::size_t>(c) + 1);
  }
  LabelSet set(lists.size(), std::max<std::size_t>(classes, 1));
  for (std::size_t i = 0; i < lists.size(); ++i) {
    for (int c : lists[i]) {
      if (c < 0 || static_cast<std::size_t>(c) >= set.classes_) throw ContractError("LabelSet: class index out of range");
      set.set(i, static_cast<std::size_t>(c));
    }
  }
  return set;
}

LabelSet LabelSet::from_classes(std::span<const int> classes, std::size_t class_count) {
  std::vector<std::vector<int>> lists;
  lists.reserve(classes.size());
  for (int c : classes) lists.push_back({c});
  return from_lists(lists, class_count);
}

bool LabelSet::has(std::size_t row, std::size_t cls) const {
  return (data_[row * words_ + cls / 64] >> (cls % 64)) & 1u;
}

void LabelSet::set(std::size_t row, std::size_t cls) { data_[row * words_ + cls / 64] |= std::uint64_t{1} << (cls % 64); }

std::span<const std::uint64_t> LabelSet::row_words(std::size_t row) const { return {data_.data() + row * words_, words_}; }

std::vector<std::vector<int>> LabelSet::to_lists() const {
  std::vector<std::vector<int>> out(count_);
  for (std::size_t i = 0; i < count_; ++i)
    for (std::size_t c = 0; c < classes_; ++c)
      if (has(i, c)) out[i].push_back(static_cast<int>(c));
  return out;
}

std::size_t hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b, std::size_t bits) {
  if (a.size() != b.size() || a.size() != (bits + 63) / 64) {
    throw ContractError("hamming_distance: code lengths differ");
  }
  std::size_t d = 0;
  for (std::size_t w = 0; w < a.size(); ++w) d += static_cast<std::size_t>(std::popcount(a[w] ^ b[w]));
  return d;
}

std::size_t hamming_distance(const BinaryCodes& a, std::size_t i, const BinaryCodes& b, std::size_t j) {
  if (a.code_length() != b.code_length()) throw ContractError("hamming_distance: code lengths differ");
  return hamming_distance(a.row_words(i), b.row_words(j), a.code_length());
}

int relevance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t w = 0; w < n; ++w)
    if (a[w] & b[w]) return 1;
  return 0;
}

int relevance(const LabelSet& a, std::size_t i, const LabelSet& b, std::size_t j) {
  return relevance(a.row_words(i), b.row_words(j));
}

std::vector<std::size_t> hamming_ranking(const BinaryCodes& queries, std::size_t q, const BinaryCodes& database,
                                         std::size_t skip) {
  const std::size_t bits = database.code_length();
  // Counting sort by distance keeps ascending index order within a distance.
  std::vector<std::vector<std::size_t>> buckets(bits + 1);
  for (std::size_t j = 0; j < database.size(); ++j) {
    if (j == skip) continue;
    buckets[hamming_distance(queries, q, database, j)].push_back(j);
  }
  std::vector<std::size_t> order;
  order.reserve(database.size());
  for (const auto& b : buckets) order.insert(order.end(), b.begin(), b.end());
  return order;
}

double average_precision(std::span<const int> relevant_in_rank_order) {
  double hits = 0.0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < relevant_in_rank_order.size(); ++rank) {
    if (relevant_in_rank_order[rank]) {
      hits += 1.0;
      sum += hits / static_cast<double>(rank + 1);
    }
  }
  return hits > 0.0 ? sum / hits : 0.0;
}

double map_at_k(const LabeledCodes& queries, const LabeledCodes& database, std::size_t k, bool exclude_self) {
  if (k < 1) throw ContractError("map_at_k: K must be at least 1");
  check_pair(queries, database, exclude_self);
  if (queries.codes.size() == 0) return 0.0;
  double total = 0.0;
  std::vector<int> rel;
  for (std::size_t q = 0; q < queries.codes.size(); ++q) {
    const auto order = hamming_ranking(queries.codes, q, database.codes, skip_for(q, exclude_self));
    const std::size_t depth = std::min(k, order.size());
    rel.assign(depth, 0);
    for (std::size_t t = 0; t < depth; ++t) rel[t] = relevance(queries.labels, q, database.labels, order[t]);
    total += average_precision(rel);
  }
  return total / static_cast<double>(queries.codes.size());
}

std::vector<std::pair<std::size_t, double>> precision_at_k(const LabeledCodes& queries, const LabeledCodes& database,
                                                           std::span<const std::size_t> ks, bool exclude_self) {
  check_pair(queries, database, exclude_self);
  std::vector<std::pair<std::size_t, double>> out;
  std::vector<double> sums(ks.size(), 0.0);
  for (std::size_t q = 0; q < queries.codes.size(); ++q) {
    const auto order = hamming_ranking(queries.codes, q, database.codes, skip_for(q, exclude_self));
    std::vector<std::size_t> prefix(order.size() + 1, 0);
    for (std::size_t t = 0; t < order.size(); ++t)
      prefix[t + 1] = prefix[t] + static_cast<std::size_t>(relevance(queries.labels, q, database.labels, order[t]));
    for (std::size_t m = 0; m < ks.size(); ++m) {
      const std::size_t depth = std::min(ks[m], order.size());
      if (depth > 0) sums[m] += static_cast<double>(prefix[depth]) / static_cast<double>(depth);
    }
  }
  const double nq = std::max<double>(1.0, static_cast<double>(queries.codes.size()));
  for (std::size_t m = 0; m < ks.size(); ++m) out.emplace_back(ks[m], sums[m] / nq);
  return out;
}

std::vector<std::pair<double, double>> pr_curve(const LabeledCodes& queries, const LabeledCodes& database,
                                                bool exclude_self) {
  check_pair(queries, database, exclude_self);
  const std::size_t bits = database.codes.code_length();
  // Per radius: retrieved and relevant-retrieved counts summed over queries.
  std::vector<double> retrieved(bits + 1, 0.0), hit(bits + 1, 0.0);
  double relevant_total = 0.0;
  for (std::size_t q = 0; q < queries.codes.size(); ++q) {
    for (std::size_t j = 0; j < database.codes.size(); ++j) {
      if (exclude_self && j == q) continue;
      const std::size_t d = hamming_distance(queries.codes, q, database.codes, j);
      const int rel = relevance(queries.labels, q, database.labels, j);
      retrieved[d] += 1.0;
      hit[d] += rel;
      relevant_total += rel;
    }
  }
  std::vector<std::pair<double, double>> curve;
  double cum_retrieved = 0.0, cum_hit = 0.0;
  for (std::size_t radius = 0; radius <= bits; ++radius) {
    cum_retrieved += retrieved[radius];
    cum_hit += hit[radius];
    const double precision = cum_retrieved > 0.0 ? cum_hit / cum_retrieved : 1.0;
    const double recall = relevant_total > 0.0 ? cum_hit / relevant_total : 0.0;
    curve.emplace_back(recall, precision);
  }
  return curve;
}

RetrievalReport evaluate(const LabeledCodes& queries, const LabeledCodes& database, const EvalOptions& options) {
  RetrievalReport report;
  report.k = options.map_k;
  report.map_at_k = map_at_k(queries, database, options.map_k, options.exclude_self);
  report.precision_at_k = precision_at_k(queries, database, options.precision_ks, options.exclude_self);
  report.pr_curve = pr_curve(queries, database, options.exclude_self);
  report.query_count = queries.codes.size();
  report.database_count = database.codes.size();
  return report;
}

BinaryCodes random_codes(std::size_t count, std::size_t bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  BinaryCodes codes(count, bits);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t k = 0; k < bits; ++k) codes.set(i, k, coin(rng));
  return codes;
}

}  // namespace dsch
