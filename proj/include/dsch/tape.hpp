#pragma once

// Reverse-mode differentiation over matrix-valued nodes.
//
// A Tape records primitives in execution order; every node's inputs precede
// it, so a single reverse sweep visits each node once. Gradients are
// accumulated in tape order, which makes backward bit-deterministic.
//
// A Tape is single-writer: record and backward from one thread at a time.

#include <array>
#include <cstdint>
#include <vector>

#include "dsch/ndmath.hpp"

namespace dsch::ad {

class Tape;

enum class Op : std::uint8_t {
  Leaf,
  Constant,
  MatMul,
  Transpose,
  Add,
  Sub,
  Hadamard,
  Scale,
  AddRowBroadcast,
  AddConstant,
  Relu,
  Tanh,
  RowNormalize,
  VStack,
  Sum,
  WeightedSum,
  LogSumExp,
  LogSoftmaxRows,
};

/// Handle to a node on a Tape. Cheap to copy; valid while the Tape lives.
class Var {
 public:
  Var() = default;

  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Result of a backward sweep: one gradient per parameter leaf, in the order
/// the leaves were created.
class Gradients {
 public:
  const Matrix& operator[](const Var& leaf) const;
  const std::vector<Matrix>& all() const { return grads_; }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::vector<int> leaf_ids_;
  std::vector<Matrix> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf owning its value.
  Var parameter(Matrix value);
  /// Differentiable leaf viewing `value`, which must outlive the tape and
  /// stay unmodified until backward returns.
  Var parameter_ref(const Matrix& value);
  Var constant(Matrix value);

  std::size_t size() const { return nodes_.size(); }
  std::size_t parameter_count() const { return leaves_.size(); }
  Op op(int id) const { return nodes_.at(static_cast<std::size_t>(id)).op; }
  std::array<int, 2> inputs(int id) const { return nodes_.at(static_cast<std::size_t>(id)).inputs; }
  const Matrix& value(int id) const;

  /// d(output)/d(leaf) for every parameter leaf. Output must be 1x1.
  Gradients backward(const Var& output) const;

  // Recording primitive used by the free functions below.
  Var record(Op op, std::array<int, 2> inputs, Matrix value, Matrix aux = {}, double scalar = 0.0);
  const Matrix& aux(int id) const { return nodes_[static_cast<std::size_t>(id)].aux; }

 private:
  struct Node {
    Op op = Op::Constant;
    std::array<int, 2> inputs{-1, -1};
    Matrix value;
    const Matrix* view = nullptr;
    Matrix aux;
    double scalar = 0.0;
  };

  std::vector<Node> nodes_;
  std::vector<int> leaves_;
};

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
inline Var operator*(double s, const Var& a) { return scale(a, s); }
/// a (n x c) plus row vector b (1 x c) added to every row.
Var add_row_broadcast(const Var& a, const Var& row);
/// a plus a fixed matrix of the same shape.
Var add_constant(const Var& a, const Matrix& c);
Var relu(const Var& a);
Var tanh(const Var& a);
/// Each row divided by its L2 norm. Zero rows raise DegenerateInputError.
Var row_normalize(const Var& a);
Var vstack(const Var& top, const Var& bottom);
Var sum(const Var& a);
/// sum(w .* a) for a fixed weight matrix w.
Var weighted_sum(const Var& a, const Matrix& w);
/// log(sum(exp(a))) over every entry.
Var log_sum_exp(const Var& a);
Var log_softmax_rows(const Var& a);
/// Cosine similarity of two 1 x r row vectors.
Var cosine_sim(const Var& x, const Var& y);

}  // namespace dsch::ad
