#include <doctest.h>

#include <random>

#include "clenshaw/graph.hpp"
#include "clenshaw/linear_filters.hpp"
#include "clenshaw/spectral.hpp"
#include "clenshaw/verify.hpp"
#include "test_helpers.hpp"

using namespace clenshaw;

namespace {

struct Fixture {
  explicit Fixture(std::uint64_t seed, std::size_t n = 30, std::size_t f = 3) : rng(seed) {
    p = normalized_adjacency(verify::random_graph(n, 0.2, rng));
    dense = p.matrix.to_dense();
    eig = eig_sym(dense);
    h = verify::random_matrix(n, f, rng);
  }
  std::vector<double> random_alphas(int K) {
    std::vector<double> a(static_cast<std::size_t>(K) + 1);
    for (double& v : a) v = verify::uniform(rng, -1, 1);
    return a;
  }
  std::mt19937_64 rng;
  PropagationOperator p;
  Matrix dense;
  EigenDecomposition eig;
  Matrix h;
};

}  // namespace

TEST_CASE("horner propagation") {
  Fixture fx(1);
  SUBCASE("K=0") {
    auto t = horner_propagate_linear(fx.p, fx.h, {0.7}, 0);
    CHECK(t.final_state() == 0.7 * fx.h);
    CHECK(t.length() == 3);
    CHECK(max_abs(t.state(-1)) == 0.0);
    CHECK(max_abs(t.state(-2)) == 0.0);
  }
  SUBCASE("K=1") {
    auto t = horner_propagate_linear(fx.p, fx.h, {0.4, -0.3}, 1);
    Matrix expected = 0.4 * matmul(fx.dense, fx.h) + (-0.3) * fx.h;
    CHECK(relative_frobenius_error(t.final_state(), expected) <= 1e-13);
  }
  SUBCASE("K=8 equals the reversed monomial filter") {
    auto a = fx.random_alphas(8);
    auto t = horner_propagate_linear(fx.p, fx.h, a, 8);
    Matrix oracle(fx.h.rows(), fx.h.cols());
    for (int l = 0; l <= 8; ++l) oracle += a[static_cast<std::size_t>(8 - l)] * testing::dense_power_apply(fx.dense, l, fx.h);
    CHECK(relative_frobenius_error(t.final_state(), oracle) <= 1e-12);
    CHECK(relative_frobenius_error(t.final_state(), apply_filter_exact(fx.eig, layer_to_basis(a, Basis::Monomial), fx.h)) <= 1e-9);
  }
}

TEST_CASE("clenshaw propagation") {
  Fixture fx(2, 40);
  SUBCASE("K=0") {
    CHECK(clenshaw_propagate_linear(fx.p, fx.h, {2.0}, 0).final_state() == 2.0 * fx.h);
  }
  SUBCASE("initial residues give the identity filter") {
    std::vector<double> a(7, 0.0);
    a.back() = 1.0;
    CHECK(clenshaw_propagate_linear(fx.p, fx.h, a, 6).final_state() == fx.h);
  }
  SUBCASE("K=10 equals the chebyshev-U filter") {
    auto a = fx.random_alphas(10);
    auto t = clenshaw_propagate_linear(fx.p, fx.h, a, 10);
    CHECK(relative_frobenius_error(t.final_state(), apply_filter_exact(fx.eig, layer_to_basis(a, Basis::ChebyshevU), fx.h)) <= 1e-9);
  }
  SUBCASE("first residue only gives U_K") {
    std::vector<double> a(5, 0.0);
    a[0] = 1.0;
    Matrix u4 = 16.0 * testing::dense_power_apply(fx.dense, 4, fx.h) - 12.0 * testing::dense_power_apply(fx.dense, 2, fx.h) + fx.h;
    CHECK(relative_frobenius_error(clenshaw_propagate_linear(fx.p, fx.h, a, 4).final_state(), u4) <= 1e-12);
  }
}

TEST_CASE("propagation input errors") {
  Fixture fx(3, 10);
  CHECK_THROWS_AS(horner_propagate_linear(fx.p, fx.h, {1, 2}, 2), std::invalid_argument);
  CHECK_THROWS_AS(clenshaw_propagate_linear(fx.p, fx.h, {1}, -1), std::invalid_argument);
  CHECK_THROWS_AS(clenshaw_propagate_linear(fx.p, Matrix(4, 2), {1}, 0), DimensionError);
  CHECK_THROWS_AS(clenshaw_propagate_linear(laplacian(fx.p), fx.h, {1}, 0), std::invalid_argument);
  CHECK_THROWS_AS(gcnii_propagate_linear(fx.p, fx.h, 1.5, 2), std::invalid_argument);
  CHECK_THROWS_AS(fixed_param_coefficients(-0.1, 2), std::invalid_argument);
}

TEST_CASE("gcnii propagation") {
  Fixture fx(4, 25);
  for (int K : {0, 3, 9}) CHECK(gcnii_propagate_linear(fx.p, fx.h, 1.0, K) == fx.h);
  CHECK(relative_frobenius_error(gcnii_propagate_linear(fx.p, fx.h, 0.0, 5), testing::dense_power_apply(fx.dense, 5, fx.h)) <= 1e-13);

  const double alpha = 0.1;
  const int K = 6;
  Matrix expected(fx.h.rows(), fx.h.cols());
  for (int l = 0; l <= K; ++l) {
    const double coef = l < K ? alpha * std::pow(1 - alpha, l) : std::pow(1 - alpha, K);
    expected += coef * testing::dense_power_apply(fx.dense, l, fx.h);
  }
  CHECK(relative_frobenius_error(gcnii_propagate_linear(fx.p, fx.h, alpha, K), expected) <= 1e-10);
  auto c = gcnii_unfolded_coefficients(alpha, K);
  CHECK(c.basis() == Basis::Monomial);
  CHECK(c[0] == doctest::Approx(0.1));
  CHECK(c[6] == doctest::Approx(std::pow(0.9, 6)));
}

TEST_CASE("fixed_param_coefficients") {
  auto as_vec = [](const CoeffVector& c) { return std::vector<double>(c.coeffs().begin(), c.coeffs().end()); };
  CHECK(as_vec(fixed_param_coefficients(1.0, 3)) == std::vector<double>{0, 0, 0, 1});
  CHECK(as_vec(fixed_param_coefficients(0.0, 3)) == std::vector<double>{1, 0, 0, 0});
  CHECK(as_vec(fixed_param_coefficients(0.5, 2)) == std::vector<double>{0.25, 0.25, 0.5});
  double s = 0.0;
  const CoeffVector c = fixed_param_coefficients(0.3, 7);
  for (double v : c.coeffs()) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("delta residue unfolds to powers of 2P - I") {
  Fixture fx(5, 15);
  auto a = fx.random_alphas(4);
  Matrix m = 2.0 * fx.dense - Matrix::identity(15);
  Matrix expected(15, fx.h.cols());
  for (int l = 0; l <= 4; ++l) expected += a[static_cast<std::size_t>(4 - l)] * testing::dense_power_apply(m, l, fx.h);
  CHECK(relative_frobenius_error(delta_residue_propagate_linear(fx.p, fx.h, a, 4).final_state(), expected) <= 1e-12);
}

TEST_CASE("layer_to_basis reverses") {
  auto c = layer_to_basis({1, 2, 3}, Basis::ChebyshevU);
  CHECK(c.basis() == Basis::ChebyshevU);
  CHECK(c[0] == 3);
  CHECK(c[2] == 1);
}
