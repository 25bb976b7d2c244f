#include "dsch/tape.hpp"

#include <algorithm>
#include <limits>

namespace dsch::ad {

namespace {

Tape& same_tape(const Var& a, const Var& b, const char* what) {
  if (!a.valid() || !b.valid()) throw ContractError(std::string(what) + ": unbound variable");
  if (a.tape() != b.tape()) throw ContractError(std::string(what) + ": operands live on different tapes");
  return *a.tape();
}

Tape& tape_of(const Var& a, const char* what) {
  if (!a.valid()) throw ContractError(std::string(what) + ": unbound variable");
  return *a.tape();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": " + shape_string(a) + " vs " + shape_string(b));
  }
}

void accumulate(Matrix& slot, const Matrix& g) {
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

}  // namespace

const Matrix& Var::value() const {
  if (!tape_) throw ContractError("Var::value: unbound variable");
  return tape_->value(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("Var::scalar: node is " + shape_string(v));
  return v(0, 0);
}

const Matrix& Gradients::operator[](const Var& leaf) const {
  const auto it = std::find(leaf_ids_.begin(), leaf_ids_.end(), leaf.id());
  if (it == leaf_ids_.end()) throw ContractError("Gradients: variable is not a parameter leaf");
  return grads_[static_cast<std::size_t>(it - leaf_ids_.begin())];
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(id));
  return n.view ? *n.view : n.value;
}

Var Tape::parameter(Matrix value) {
  Var v = record(Op::Leaf, {-1, -1}, std::move(value));
  leaves_.push_back(v.id());
  return v;
}

Var Tape::parameter_ref(const Matrix& value) {
  Var v = record(Op::Leaf, {-1, -1}, Matrix{});
  nodes_.back().view = &value;
  leaves_.push_back(v.id());
  return v;
}

Var Tape::constant(Matrix value) { return record(Op::Constant, {-1, -1}, std::move(value)); }

Var Tape::record(Op op, std::array<int, 2> inputs, Matrix value, Matrix aux, double scalar) {
  const int id = static_cast<int>(nodes_.size());
  for (int in : inputs) {
    if (in >= id) throw ContractError("Tape::record: input does not precede node");
  }
  nodes_.push_back(Node{op, inputs, std::move(value), nullptr, std::move(aux), scalar});
  return Var(this, id);
}

Gradients Tape::backward(const Var& output) const {
  if (output.tape() != this) throw ContractError("backward: output belongs to another tape");
  const Matrix& out = value(output.id());
  if (out.size() != 1) {
    throw ContractError("backward: output must be a scalar node, got " + shape_string(out));
  }

  std::vector<Matrix> bar(nodes_.size());
  bar[static_cast<std::size_t>(output.id())] = Matrix::Ones(1, 1);

  for (int i = output.id(); i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    const Matrix& g = bar[static_cast<std::size_t>(i)];
    if (g.size() == 0) continue;
    const int a = n.inputs[0];
    const int b = n.inputs[1];
    auto slot = [&](int id) -> Matrix& { return bar[static_cast<std::size_t>(id)]; };

    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::MatMul:
        accumulate(slot(a), g * value(b).transpose());
        accumulate(slot(b), value(a).transpose() * g);
        break;
      case Op::Transpose:
        accumulate(slot(a), g.transpose());
        break;
      case Op::Add:
        accumulate(slot(a), g);
        accumulate(slot(b), g);
        break;
      case Op::Sub:
        accumulate(slot(a), g);
        accumulate(slot(b), -g);
        break;
      case Op::Hadamard:
        accumulate(slot(a), g.cwiseProduct(value(b)));
        accumulate(slot(b), g.cwiseProduct(value(a)));
        break;
      case Op::Scale:
        accumulate(slot(a), n.scalar * g);
        break;
      case Op::AddRowBroadcast:
        accumulate(slot(a), g);
        accumulate(slot(b), g.colwise().sum());
        break;
      case Op::AddConstant:
        accumulate(slot(a), g);
        break;
      case Op::Relu:
        accumulate(slot(a), (n.value.array() > 0.0).select(g.array(), 0.0).matrix());
        break;
      case Op::Tanh:
        accumulate(slot(a), g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      case Op::RowNormalize: {
        // y = x/|x|  =>  dx = (g - y (y.g)) / |x|
        const Matrix& y = n.value;
        const Vector proj = y.cwiseProduct(g).rowwise().sum();
        Matrix dx = g - (y.array().colwise() * proj.array()).matrix();
        dx.array().colwise() /= n.aux.col(0).array();
        accumulate(slot(a), dx);
        break;
      }
      case Op::VStack: {
        const Index top = value(a).rows();
        accumulate(slot(a), g.topRows(top));
        accumulate(slot(b), g.bottomRows(g.rows() - top));
        break;
      }
      case Op::Sum:
        accumulate(slot(a), Matrix::Constant(value(a).rows(), value(a).cols(), g(0, 0)));
        break;
      case Op::WeightedSum:
        accumulate(slot(a), g(0, 0) * n.aux);
        break;
      case Op::LogSumExp:
        accumulate(slot(a), g(0, 0) * n.aux);
        break;
      case Op::LogSoftmaxRows: {
        // y_i = x_i - lse(x_i)  =>  dx_i = g_i - softmax(x_i) * sum(g_i)
        const Vector gsum = g.rowwise().sum();
        Matrix dx = g - (n.value.array().exp().colwise() * gsum.array()).matrix();
        accumulate(slot(a), dx);
        break;
      }
    }
  }

  Gradients out_grads;
  out_grads.leaf_ids_ = leaves_;
  out_grads.grads_.reserve(leaves_.size());
  for (int leaf : leaves_) {
    Matrix& g = bar[static_cast<std::size_t>(leaf)];
    if (g.size() == 0) {
      const Matrix& v = value(leaf);
      out_grads.grads_.push_back(Matrix::Zero(v.rows(), v.cols()));
    } else {
      out_grads.grads_.push_back(std::move(g));
    }
  }
  return out_grads;
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "matmul");
  return t.record(Op::MatMul, {a.id(), b.id()}, dsch::matmul(a.value(), b.value()));
}

Var transpose(const Var& a) {
  Tape& t = tape_of(a, "transpose");
  return t.record(Op::Transpose, {a.id(), -1}, a.value().transpose());
}

Var operator+(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  return t.record(Op::Add, {a.id(), b.id()}, a.value() + b.value());
}

Var operator-(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  return t.record(Op::Sub, {a.id(), b.id()}, a.value() - b.value());
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "hadamard");
  require_same_shape(a.value(), b.value(), "hadamard");
  return t.record(Op::Hadamard, {a.id(), b.id()}, a.value().cwiseProduct(b.value()));
}

Var scale(const Var& a, double s) {
  Tape& t = tape_of(a, "scale");
  return t.record(Op::Scale, {a.id(), -1}, s * a.value(), {}, s);
}

Var add_row_broadcast(const Var& a, const Var& row) {
  Tape& t = same_tape(a, row, "add_row_broadcast");
  const Matrix& r = row.value();
  if (r.rows() != 1 || r.cols() != a.value().cols()) {
    throw ShapeError("add_row_broadcast: " + shape_string(a.value()) + " + " + shape_string(r));
  }
  Matrix out = a.value();
  out.rowwise() += r.row(0);
  return t.record(Op::AddRowBroadcast, {a.id(), row.id()}, std::move(out));
}

Var add_constant(const Var& a, const Matrix& c) {
  Tape& t = tape_of(a, "add_constant");
  require_same_shape(a.value(), c, "add_constant");
  return t.record(Op::AddConstant, {a.id(), -1}, a.value() + c);
}

Var relu(const Var& a) {
  Tape& t = tape_of(a, "relu");
  return t.record(Op::Relu, {a.id(), -1}, a.value().cwiseMax(0.0));
}

Var tanh(const Var& a) {
  Tape& t = tape_of(a, "tanh");
  return t.record(Op::Tanh, {a.id(), -1}, a.value().array().tanh().matrix());
}

Var row_normalize(const Var& a) {
  Tape& t = tape_of(a, "row_normalize");
  const Matrix& x = a.value();
  Matrix norms = x.rowwise().norm();
  for (Index i = 0; i < norms.rows(); ++i) {
    if (!(norms(i, 0) > 0.0)) {
      throw DegenerateInputError("row_normalize: row " + std::to_string(i) + " has zero norm");
    }
  }
  Matrix y = x;
  y.array().colwise() /= norms.col(0).array();
  return t.record(Op::RowNormalize, {a.id(), -1}, std::move(y), std::move(norms));
}

Var vstack(const Var& top, const Var& bottom) {
  Tape& t = same_tape(top, bottom, "vstack");
  const Matrix& x = top.value();
  const Matrix& y = bottom.value();
  if (x.cols() != y.cols()) throw ShapeError("vstack: " + shape_string(x) + " over " + shape_string(y));
  Matrix out(x.rows() + y.rows(), x.cols());
  out << x, y;
  return t.record(Op::VStack, {top.id(), bottom.id()}, std::move(out));
}

Var sum(const Var& a) {
  Tape& t = tape_of(a, "sum");
  return t.record(Op::Sum, {a.id(), -1}, Matrix::Constant(1, 1, a.value().sum()));
}

Var weighted_sum(const Var& a, const Matrix& w) {
  Tape& t = tape_of(a, "weighted_sum");
  require_same_shape(a.value(), w, "weighted_sum");
  const double s = a.value().cwiseProduct(w).sum();
  return t.record(Op::WeightedSum, {a.id(), -1}, Matrix::Constant(1, 1, s), w);
}

Var log_sum_exp(const Var& a) {
  Tape& t = tape_of(a, "log_sum_exp");
  const Matrix& x = a.value();
  const double m = x.maxCoeff();
  Matrix e = (x.array() - m).exp().matrix();
  const double total = e.sum();
  e /= total;
  return t.record(Op::LogSumExp, {a.id(), -1}, Matrix::Constant(1, 1, m + std::log(total)), std::move(e));
}

Var log_softmax_rows(const Var& a) {
  Tape& t = tape_of(a, "log_softmax_rows");
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    y.row(i) = x.row(i).array() - lse;
  }
  return t.record(Op::LogSoftmaxRows, {a.id(), -1}, std::move(y));
}

Var cosine_sim(const Var& x, const Var& y) {
  if (x.value().rows() != 1 || y.value().rows() != 1 || x.value().cols() != y.value().cols()) {
    throw ShapeError("cosine_sim: " + shape_string(x.value()) + " vs " + shape_string(y.value()));
  }
  return sum(hadamard(row_normalize(x), row_normalize(y)));
}

}  // namespace dsch::ad
