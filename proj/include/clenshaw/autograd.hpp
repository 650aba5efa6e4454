#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "clenshaw/graph.hpp"
#include "clenshaw/matrix.hpp"

namespace clenshaw::ad {

enum class ParamGroup { Alpha, Weight };

/// Trainable tensor with a same-shape gradient accumulator.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix value, ParamGroup group)
      : name(std::move(name)), value(std::move(value)), group(group) {
    grad = Matrix(this->value.rows(), this->value.cols());
  }

  std::string name;
  Matrix value;
  Matrix grad;
  ParamGroup group = ParamGroup::Weight;

  void zero_grad() { grad = Matrix(value.rows(), value.cols()); }
};

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

enum class Mode { Train, Eval };

enum class OpKind {
  Constant,
  Param,
  MatMul,
  Spmm,
  Add,
  Sub,
  Scale,
  AddRowBias,
  Relu,
  Dropout,
  LogSoftmax,
  NllLoss,
  Sum,
};

/// Append-only record of forward operations. Nodes are stored in creation
/// order, which is a valid topological order; backward() walks it in
/// reverse.
class Tape {
 public:
  Var constant(Matrix value);
  /// Leaf bound to p. backward() adds the leaf gradient into p.grad.
  Var param(Parameter& p);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient of the last backward() loss w.r.t. v; zero-sized when v did
  /// not receive any gradient.
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// One flag per ReLU output entry, true where the unit is active. Two
  /// forward passes with equal patterns lie on the same linear piece.
  std::vector<bool> activation_pattern() const;

  /// Reverse sweep from a 1x1 loss node. Throws std::invalid_argument for a
  /// non-scalar loss.
  void backward(Var loss);

  // Used by the primitive implementations.
  using Backprop = std::function<void(Tape&, const Matrix& out_grad)>;
  Var push(OpKind kind, Matrix value, bool requires_grad, Backprop backprop);
  /// Adds g into the gradient slot of v (allocated on first use).
  void accumulate(Var v, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    Parameter* param = nullptr;
    OpKind kind = OpKind::Constant;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

Var matmul(Tape& t, Var a, Var b);
/// P a with P treated as constant data. p must outlive the tape's backward().
Var spmm_const(Tape& t, const PropagationOperator& p, Var a);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
/// a * s where s is a 1x1 node.
Var scale(Tape& t, Var a, Var s);
Var scale(Tape& t, Var a, double s);
/// Adds a 1 x f bias row to every row of a.
Var add_row_bias(Tape& t, Var a, Var bias);
Var relu(Tape& t, Var a);
/// Inverted dropout. stream selects an independent counter-based random
/// stream; Eval mode (or rate 0) returns a unchanged.
Var dropout(Tape& t, Var a, double rate, std::uint64_t stream, Mode mode);
Var log_softmax_rows(Tape& t, Var a);
/// Mean over masked rows of -logp[row, label[row]].
Var nll_loss(Tape& t, Var logp, std::span<const int> labels, std::span<const std::size_t> mask);
Var sum(Tape& t, Var a);

/// h ((1 - beta) I + beta W), evaluated as (1 - beta) h + beta (h W).
Var identity_mapping(Tape& t, Var h, Var w, double beta);

/// Stream id for dropout from (seed, layer, epoch).
std::uint64_t dropout_stream(std::uint64_t seed, std::uint64_t layer, std::uint64_t epoch);

/// Classic heavy-ball momentum: v = momentum v + g; p -= lr v.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Parameter*> params, double lr, double momentum,
              double weight_decay = 0.0);
  void step();
  double learning_rate() const noexcept { return lr_; }
  std::span<Parameter* const> params() const noexcept { return params_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> velocity_;
  double lr_;
  double momentum_;
  double weight_decay_;
};

/// Adam with decoupled weight decay: p *= (1 - lr wd) before the moment update.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, double lr, double weight_decay = 0.0, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);
  void step();
  std::size_t step_count() const noexcept { return t_; }
  std::span<Parameter* const> params() const noexcept { return params_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double lr_;
  double weight_decay_;
  double beta1_;
  double beta2_;
  double eps_;
  std::size_t t_ = 0;
};

}  // namespace clenshaw::ad
