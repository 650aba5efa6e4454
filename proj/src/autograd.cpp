#include "clenshaw/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace clenshaw::ad {

Var Tape::push(OpKind kind, Matrix value, bool requires_grad, Backprop backprop) {
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Matrix value) { return push(OpKind::Constant, std::move(value), false, nullptr); }

Var Tape::param(Parameter& p) {
  Var v = push(OpKind::Param, p.value, true, nullptr);
  nodes_[v.id].param = &p;
  return v;
}

std::vector<bool> Tape::activation_pattern() const {
  std::vector<bool> out;
  for (const Node& n : nodes_) {
    if (n.kind != OpKind::Relu) continue;
    for (double v : n.value.values()) out.push_back(v > 0.0);
  }
  return out;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.empty() && !n.value.empty()) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  const Node& l = nodes_.at(loss.id);
  if (l.value.rows() != 1 || l.value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a 1x1 node");
  }
  for (Node& n : nodes_) n.grad = Matrix();
  if (!l.requires_grad) return;
  nodes_[loss.id].grad = Matrix(1, 1, 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    // Callbacks only touch earlier nodes, so n stays valid.
    if (n.backprop) n.backprop(*this, n.grad);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

namespace {

bool any_grad(const Tape& t, std::initializer_list<Var> vs) {
  return std::any_of(vs.begin(), vs.end(), [&](Var v) { return t.requires_grad(v); });
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  Matrix out = clenshaw::matmul(t.value(a), t.value(b));
  return t.push(OpKind::MatMul, std::move(out), any_grad(t, {a, b}), [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, clenshaw::matmul(g, transpose(tp.value(b))));
    if (tp.requires_grad(b)) tp.accumulate(b, clenshaw::matmul(transpose(tp.value(a)), g));
  });
}

Var spmm_const(Tape& t, const PropagationOperator& p, Var a) {
  Matrix out = spmm(p, t.value(a));
  // P is symmetric, so the adjoint is another multiplication by P.
  return t.push(OpKind::Spmm, std::move(out), t.requires_grad(a), [&p, a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, spmm(p, g));
  });
}

Var add(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "add");
  Matrix out = t.value(a) + t.value(b);
  return t.push(OpKind::Add, std::move(out), any_grad(t, {a, b}), [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "sub");
  Matrix out = t.value(a) - t.value(b);
  return t.push(OpKind::Sub, std::move(out), any_grad(t, {a, b}), [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(b)) tp.accumulate(b, -1.0 * g);
  });
}

Var scale(Tape& t, Var a, Var s) {
  const Matrix& sv = t.value(s);
  if (sv.rows() != 1 || sv.cols() != 1) throw DimensionError("scale: scalar node must be 1x1");
  Matrix out = sv(0, 0) * t.value(a);
  return t.push(OpKind::Scale, std::move(out), any_grad(t, {a, s}), [a, s](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, tp.value(s)(0, 0) * g);
    if (tp.requires_grad(s)) {
      double dot = 0.0;
      auto gv = g.values();
      auto av = tp.value(a).values();
      for (std::size_t i = 0; i < gv.size(); ++i) dot += gv[i] * av[i];
      tp.accumulate(s, Matrix(1, 1, dot));
    }
  });
}

Var scale(Tape& t, Var a, double s) {
  Matrix out = s * t.value(a);
  return t.push(OpKind::Scale, std::move(out), t.requires_grad(a),
                [a, s](Tape& tp, const Matrix& g) { tp.accumulate(a, s * g); });
}

Var add_row_bias(Tape& t, Var a, Var bias) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(bias);
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw DimensionError("add_row_bias: bias must be 1x" + std::to_string(av.cols()));
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv(0, c);
  }
  return t.push(OpKind::AddRowBias, std::move(out), any_grad(t, {a, bias}), [a, bias](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(bias)) {
      Matrix gb(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
      tp.accumulate(bias, gb);
    }
  });
}

Var relu(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return t.push(OpKind::Relu, std::move(out), t.requires_grad(a), [a](Tape& tp, const Matrix& g) {
    Matrix ga = g;
    auto in = tp.value(a).values();
    auto gv = ga.values();
    // Unit slope at exactly zero so that all-zero hidden states (the
    // residue initialization) still pass gradient to the residues.
    for (std::size_t i = 0; i < gv.size(); ++i)
      if (in[i] < 0.0) gv[i] = 0.0;
    tp.accumulate(a, ga);
  });
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t dropout_stream(std::uint64_t seed, std::uint64_t layer, std::uint64_t epoch) {
  return splitmix64(splitmix64(splitmix64(seed) ^ layer) ^ epoch);
}

Var dropout(Tape& t, Var a, double rate, std::uint64_t stream, Mode mode) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (mode == Mode::Eval || rate == 0.0) return a;
  const Matrix& av = t.value(a);
  Matrix mask(av.rows(), av.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mv = mask.values();
  // Keep when the 53-bit uniform u = bits * 2^-53 satisfies u >= rate.
  const auto threshold = static_cast<std::uint64_t>(std::ceil(rate * 0x1.0p53));
  for (std::size_t i = 0; i < mv.size(); ++i) {
    mv[i] = (splitmix64(stream + i) >> 11) >= threshold ? keep_scale : 0.0;
  }
  Matrix out = av;
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= mv[i];
  return t.push(OpKind::Dropout, std::move(out), t.requires_grad(a),
                [a, mask = std::move(mask)](Tape& tp, const Matrix& g) {
                  Matrix ga = g;
                  auto gv = ga.values();
                  auto m = mask.values();
                  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= m[i];
                  tp.accumulate(a, ga);
                });
}

Var log_softmax_rows(Tape& t, Var a) {
  const Matrix& av = t.value(a);
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto in = av.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (double v : in) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = in[c] - lse;
  }
  Var self{t.size()};
  return t.push(OpKind::LogSoftmax, std::move(out), t.requires_grad(a), [a, self](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(self);
    Matrix ga(g.rows(), g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double gs = 0.0;
      for (double v : g.row(r)) gs += v;
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) = g(r, c) - std::exp(y(r, c)) * gs;
    }
    tp.accumulate(a, ga);
  });
}

Var nll_loss(Tape& t, Var logp, std::span<const int> labels, std::span<const std::size_t> mask) {
  const Matrix& lp = t.value(logp);
  if (mask.empty()) throw std::invalid_argument("nll_loss: mask selects no nodes");
  if (labels.size() != lp.rows()) throw DimensionError("nll_loss: one label per row required");
  double total = 0.0;
  for (std::size_t r : mask) {
    if (r >= lp.rows()) throw std::out_of_range("nll_loss: mask index out of range");
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= lp.cols()) {
      throw std::out_of_range("nll_loss: label out of range");
    }
    total -= lp(r, static_cast<std::size_t>(y));
  }
  const double inv = 1.0 / static_cast<double>(mask.size());
  std::vector<int> lab(labels.begin(), labels.end());
  std::vector<std::size_t> rows(mask.begin(), mask.end());
  return t.push(OpKind::NllLoss, Matrix(1, 1, total * inv), t.requires_grad(logp),
                [logp, lab = std::move(lab), rows = std::move(rows), inv](Tape& tp,
                                                                          const Matrix& g) {
                  const Matrix& v = tp.value(logp);
                  Matrix gl(v.rows(), v.cols());
                  for (std::size_t r : rows) gl(r, static_cast<std::size_t>(lab[r])) -= g(0, 0) * inv;
                  tp.accumulate(logp, gl);
                });
}

Var sum(Tape& t, Var a) {
  double s = 0.0;
  for (double v : t.value(a).values()) s += v;
  return t.push(OpKind::Sum, Matrix(1, 1, s), t.requires_grad(a), [a](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(a);
    tp.accumulate(a, Matrix(av.rows(), av.cols(), g(0, 0)));
  });
}

Var identity_mapping(Tape& t, Var h, Var w, double beta) {
  const Matrix& wv = t.value(w);
  if (wv.rows() != wv.cols()) throw DimensionError("identity_mapping: W must be square");
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("identity_mapping: beta must lie in [0, 1]");
  }
  if (beta == 0.0) return h;
  Var hw = matmul(t, h, w);
  if (beta == 1.0) return hw;
  return add(t, scale(t, h, 1.0 - beta), scale(t, hw, beta));
}

SgdMomentum::SgdMomentum(std::vector<Parameter*> params, double lr, double momentum,
                         double weight_decay)
    : params_(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  velocity_.reserve(params_.size());
  for (Parameter* p : params_) velocity_.emplace_back(p->value.rows(), p->value.cols());
}

void SgdMomentum::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    auto val = p.value.values();
    auto g = p.grad.values();
    auto v = velocity_[i].values();
    for (std::size_t k = 0; k < val.size(); ++k) {
      const double gk = g[k] + weight_decay_ * val[k];
      v[k] = momentum_ * v[k] + gk;
      val[k] -= lr_ * v[k];
    }
  }
}

Adam::Adam(std::vector<Parameter*> params, double lr, double weight_decay, double beta1,
           double beta2, double eps)
    : params_(std::move(params)),
      lr_(lr),
      weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double decay = 1.0 - lr_ * weight_decay_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    auto val = p.value.values();
    auto g = p.grad.values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t k = 0; k < val.size(); ++k) {
      val[k] *= decay;
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      val[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace clenshaw::ad
