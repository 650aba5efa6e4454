#include <doctest.h>

#include <cmath>
#include <random>

#include "clenshaw/autograd.hpp"
#include "clenshaw/graph.hpp"
#include "clenshaw/verify.hpp"

using namespace clenshaw;
using namespace clenshaw::ad;

namespace {

// Central-difference derivative of f at p.value[idx].
template <class F>
double central_difference(Parameter& p, std::size_t idx, F&& f, double h = 1e-6) {
  double& slot = p.value.values()[idx];
  const double saved = slot;
  slot = saved + h;
  const double plus = f();
  slot = saved - h;
  const double minus = f();
  slot = saved;
  return (plus - minus) / (2 * h);
}

}  // namespace

TEST_CASE("relu forward and backward") {
  Parameter a("a", Matrix(1, 3, {-2.0, 0.5, 3.0}), ParamGroup::Weight);
  Tape t;
  Var out = relu(t, t.param(a));
  CHECK(t.value(out) == Matrix(1, 3, {0.0, 0.5, 3.0}));
  t.backward(sum(t, out));
  CHECK(a.grad(0, 0) == 0.0);
  CHECK(a.grad(0, 1) == 1.0);
}

TEST_CASE("log_softmax and nll") {
  Tape t;
  Var lp = log_softmax_rows(t, t.constant(Matrix(1, 2, {0.0, 0.0})));
  CHECK(t.value(lp)(0, 0) == doctest::Approx(-std::log(2.0)));
  CHECK(t.value(lp)(0, 1) == doctest::Approx(-std::log(2.0)));

  Matrix logits(2, 2, {30, -30, -30, 30});
  std::vector<int> y{0, 1};
  std::vector<std::size_t> mask{0, 1};
  Var loss = nll_loss(t, log_softmax_rows(t, t.constant(logits)), y, mask);
  CHECK(t.value(loss)(0, 0) <= 1e-6);
  CHECK_THROWS_AS(nll_loss(t, lp, y, std::vector<std::size_t>{}), std::invalid_argument);
  std::vector<int> bad{5};
  CHECK_THROWS_AS(nll_loss(t, lp, bad, std::vector<std::size_t>{0}), std::out_of_range);
}

TEST_CASE("shape errors") {
  Tape t;
  Var a = t.constant(Matrix(2, 3));
  CHECK_THROWS_AS(matmul(t, a, a), DimensionError);
  CHECK_THROWS_AS(add(t, a, t.constant(Matrix(3, 2))), DimensionError);
  CHECK_THROWS_AS(t.backward(a), std::invalid_argument);
  CHECK_THROWS_AS(identity_mapping(t, a, t.constant(Matrix(3, 2)), 0.5), std::invalid_argument);
}

TEST_CASE("identity mapping") {
  std::mt19937_64 rng(1);
  Matrix hm = verify::random_matrix(4, 3, rng);
  Matrix wm = verify::random_matrix(3, 3, rng);
  Tape t;
  Var h = t.constant(hm);
  Var w = t.constant(wm);
  CHECK(t.value(identity_mapping(t, h, w, 0.0)) == hm);
  CHECK(max_abs_diff(t.value(identity_mapping(t, h, w, 1.0)), matmul(hm, wm)) <= 1e-15);
  CHECK(max_abs_diff(t.value(identity_mapping(t, h, t.constant(Matrix::identity(3)), 0.5)), hm) <= 1e-15);
}

TEST_CASE("dropout") {
  Matrix x(50, 40, 1.0);
  Tape t;
  Var in = t.constant(x);
  CHECK(t.value(dropout(t, in, 0.5, 7, Mode::Eval)) == x);
  const Matrix d = t.value(dropout(t, in, 0.5, 7, Mode::Train));
  double kept = 0;
  for (double v : d.values()) {
    CHECK((v == 0.0 || v == 2.0));
    kept += v;
  }
  CHECK(kept / static_cast<double>(x.size()) == doctest::Approx(1.0).epsilon(0.1));
  CHECK(t.value(dropout(t, in, 0.5, 7, Mode::Train)) == d);
  CHECK_FALSE(t.value(dropout(t, in, 0.5, 8, Mode::Train)) == d);
  CHECK_THROWS_AS(dropout(t, in, 1.0, 7, Mode::Train), std::invalid_argument);
  CHECK(dropout_stream(1, 2, 3) != dropout_stream(1, 3, 2));
}

TEST_CASE("gradient of sum(W x) has outer-product structure") {
  std::mt19937_64 rng(2);
  Parameter w("w", verify::random_matrix(3, 4, rng), ParamGroup::Weight);
  Matrix x = verify::random_matrix(4, 2, rng);
  auto loss = [&]() {
    Tape t;
    return t.value(sum(t, matmul(t, t.param(w), t.constant(x))))(0, 0);
  };
  Tape t;
  t.backward(sum(t, matmul(t, t.param(w), t.constant(x))));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) {
      const double expected = x(k, 0) + x(k, 1);
      CHECK(w.grad(i, k) == doctest::Approx(expected).epsilon(1e-14));
      const double fd = central_difference(w, i * 4 + k, loss);
      CHECK(std::abs(w.grad(i, k) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("independent parameter gets zero gradient") {
  Parameter a("a", Matrix(2, 2, 1.0), ParamGroup::Weight);
  Parameter b("b", Matrix(2, 2, 1.0), ParamGroup::Weight);
  Tape t;
  t.param(b);
  t.backward(sum(t, t.param(a)));
  CHECK(max_abs(b.grad) == 0.0);
  CHECK(b.grad.rows() == 2);
}

TEST_CASE("shared subexpressions accumulate") {
  Parameter a("a", Matrix(1, 1, 3.0), ParamGroup::Weight);
  Tape t;
  Var v = t.param(a);
  t.backward(sum(t, add(t, v, scale(t, v, 2.0))));
  CHECK(a.grad(0, 0) == 3.0);
}

TEST_CASE("spmm_const gradient uses the symmetric operator") {
  std::mt19937_64 rng(3);
  auto p = normalized_adjacency(verify::random_graph(10, 0.3, rng));
  Parameter a("a", verify::random_matrix(10, 2, rng), ParamGroup::Weight);
  Tape t;
  Var out = spmm_const(t, p, t.param(a));
  Var loss = sum(t, matmul(t, out, t.constant(Matrix(2, 1, 1.0))));
  t.backward(loss);
  Matrix expected = matmul(p.matrix.to_dense(), Matrix(10, 2, 1.0));
  CHECK(max_abs_diff(a.grad, expected) <= 1e-14);
}

TEST_CASE("primitive and model gradient checks") {
  for (const auto& c : verify::gradient_checks(5)) {
    INFO(c.name << " worst " << c.worst_case);
    CHECK(c.cases > 0);
    CHECK(c.max_error <= 1e-4);
  }
}

TEST_CASE("sgd momentum") {
  Parameter p("p", Matrix(1, 1, 1.0), ParamGroup::Alpha);
  SUBCASE("plain step") {
    SgdMomentum opt({&p}, 0.1, 0.0);
    p.grad(0, 0) = 1.0;
    opt.step();
    CHECK(p.value(0, 0) == doctest::Approx(0.9));
  }
  SUBCASE("velocity recurrence") {
    SgdMomentum opt({&p}, 0.1, 0.9);
    p.grad(0, 0) = 2.0;
    opt.step();
    const double first = p.value(0, 0);
    opt.step();
    CHECK(first == doctest::Approx(0.8));
    CHECK(first - p.value(0, 0) == doctest::Approx(0.1 * 1.9 * 2.0));
  }
}

TEST_CASE("adam") {
  Parameter p("p", Matrix(1, 2, {1.0, 1.0}), ParamGroup::Weight);
  SUBCASE("first step moves by lr against the gradient sign") {
    Adam opt({&p}, 0.01);
    p.grad = Matrix(1, 2, {0.3, -5.0});
    opt.step();
    CHECK(opt.step_count() == 1);
    CHECK(p.value(0, 0) == doctest::Approx(0.99).epsilon(1e-6));
    CHECK(p.value(0, 1) == doctest::Approx(1.01).epsilon(1e-6));
  }
  SUBCASE("decoupled weight decay with zero gradient") {
    Adam opt({&p}, 0.1, 0.5);
    opt.step();
    CHECK(p.value(0, 0) == doctest::Approx(0.95));
  }
}

TEST_CASE("training trajectory is bitwise reproducible") {
  auto run = []() {
    std::mt19937_64 rng(4);
    auto p = normalized_adjacency(verify::random_graph(15, 0.3, rng));
    Matrix x = verify::random_matrix(15, 3, rng);
    Parameter w("w", verify::random_matrix(3, 2, rng), ParamGroup::Weight);
    std::vector<int> y(15);
    for (std::size_t i = 0; i < 15; ++i) y[i] = static_cast<int>(i % 2);
    std::vector<std::size_t> mask{0, 1, 2, 3, 4, 5, 6, 7};
    Adam opt({&w}, 0.05);
    std::vector<double> losses;
    for (int step = 0; step < 60; ++step) {
      w.zero_grad();
      Tape t;
      Var h = dropout(t, spmm_const(t, p, t.constant(x)), 0.3, dropout_stream(9, 0, step), Mode::Train);
      Var loss = nll_loss(t, log_softmax_rows(t, matmul(t, h, t.param(w))), y, mask);
      losses.push_back(t.value(loss)(0, 0));
      t.backward(loss);
      opt.step();
    }
    return losses;
  };
  CHECK(run() == run());
}
