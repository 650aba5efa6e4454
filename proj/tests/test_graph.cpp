#include <doctest.h>

#include <algorithm>
#include <random>

#include "clenshaw/graph.hpp"
#include "clenshaw/spectral.hpp"
#include "clenshaw/verify.hpp"
#include "test_helpers.hpp"

using namespace clenshaw;

TEST_CASE("build_graph symmetrizes a single edge") {
  std::vector<Edge> e{{0, 1}};
  Graph g = build_graph(e, 2);
  CHECK(g.num_nodes() == 2);
  CHECK(g.num_edges() == 1);
  CHECK(g.adjacency().at(0, 1) == 1.0);
  CHECK(g.adjacency().at(1, 0) == 1.0);
}

TEST_CASE("build_graph collapses duplicates and drops self-loops") {
  std::vector<Edge> e{{0, 1}, {1, 0}, {2, 2}};
  Graph g = build_graph(e, 3);
  CHECK(g.adjacency().nnz() == 2);
  CHECK(g.degree(2) == 0);
}

TEST_CASE("duplicate edges keep the first weight") {
  std::vector<Edge> e{{0, 1, 2.5}, {1, 0, 7.0}};
  Graph g = build_graph(e, 2);
  CHECK(g.adjacency().at(0, 1) == 2.5);
  CHECK(g.adjacency().at(1, 0) == 2.5);
}

TEST_CASE("triangle has six entries and degree two everywhere") {
  Graph g = testing::triangle();
  CHECK(g.adjacency().nnz() == 6);
  for (std::size_t u = 0; u < 3; ++u) CHECK(g.degree(u) == 2);
}

TEST_CASE("build_graph rejects bad input") {
  std::vector<Edge> e{{0, 3}};
  CHECK_THROWS_AS(build_graph(e, 3), std::out_of_range);
  std::vector<Edge> neg{{-1, 0}};
  CHECK_THROWS_AS(build_graph(neg, 3), std::out_of_range);
  CHECK_THROWS_AS(build_graph({}, 0), std::invalid_argument);
}

TEST_CASE("build_graph is independent of edge order") {
  std::mt19937_64 rng(3);
  std::vector<Edge> e;
  for (int i = 0; i < 60; ++i) {
    e.push_back({static_cast<std::int64_t>(rng() % 20), static_cast<std::int64_t>(rng() % 20)});
  }
  Graph a = build_graph(e, 20);
  std::shuffle(e.begin(), e.end(), rng);
  Graph b = build_graph(e, 20);
  CHECK(a.adjacency().offsets == b.adjacency().offsets);
  CHECK(a.adjacency().cols == b.adjacency().cols);
  CHECK(a.adjacency().vals == b.adjacency().vals);
}

TEST_CASE("column indices are strictly increasing per row") {
  std::mt19937_64 rng(11);
  Graph g = verify::random_graph(30, 0.3, rng);
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    auto nb = g.neighbors(u);
    CHECK(std::adjacent_find(nb.begin(), nb.end(), std::greater_equal<>()) == nb.end());
  }
}

TEST_CASE("normalized adjacency closed forms") {
  SUBCASE("triangle is all one third") {
    Matrix p = normalized_adjacency(testing::triangle()).matrix.to_dense();
    for (double v : p.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("single edge is all one half") {
    std::vector<Edge> e{{0, 1}};
    Matrix p = normalized_adjacency(build_graph(e, 2)).matrix.to_dense();
    for (double v : p.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("edgeless graph gives the identity") {
    Matrix p = normalized_adjacency(build_graph({}, 3)).matrix.to_dense();
    CHECK(p == Matrix::identity(3));
  }
}

TEST_CASE("normalized adjacency entries follow the degree formula") {
  std::vector<Edge> e{{0, 1}, {1, 2}, {1, 3}};
  Graph g = build_graph(e, 4);
  const auto& p = normalized_adjacency(g).matrix;
  CHECK(p.at(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0 * 4.0)));
  CHECK(p.at(1, 1) == doctest::Approx(0.25));
  CHECK(p.at(2, 2) == doctest::Approx(0.5));
  CHECK(p.at(0, 2) == 0.0);
}

TEST_CASE("laplacian is identity minus P") {
  SUBCASE("identity P gives zero") {
    auto l = laplacian(normalized_adjacency(build_graph({}, 3)));
    CHECK(l.kind == OperatorKind::Laplacian);
    CHECK(max_abs(l.matrix.to_dense()) == 0.0);
  }
  SUBCASE("triangle") {
    Matrix l = laplacian(normalized_adjacency(testing::triangle())).matrix.to_dense();
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        CHECK(l(i, j) == doctest::Approx(i == j ? 2.0 / 3.0 : -1.0 / 3.0));
  }
  SUBCASE("eigenvalues shift to one minus mu") {
    std::mt19937_64 rng(5);
    auto p = normalized_adjacency(verify::random_graph(15, 0.3, rng));
    auto dp = eig_sym(p.matrix.to_dense());
    auto dl = eig_sym(laplacian(p).matrix.to_dense());
    for (std::size_t i = 0; i < 15; ++i) CHECK(dl.mu[i] == doctest::Approx(1.0 - dp.mu[14 - i]).epsilon(1e-12));
  }
  SUBCASE("wrong kind is rejected") {
    auto l = laplacian(normalized_adjacency(testing::triangle()));
    CHECK_THROWS_AS(laplacian(l), std::invalid_argument);
  }
}

TEST_CASE("spmm") {
  SUBCASE("identity operator leaves the signal alone") {
    auto p = normalized_adjacency(build_graph({}, 3));
    Matrix h(3, 2, {1, 2, 3, 4, 5, 6});
    CHECK(spmm(p, h) == h);
  }
  SUBCASE("triangle averages") {
    Matrix out = spmm(normalized_adjacency(testing::triangle()), testing::column({1, 2, 3}));
    for (double v : out.values()) CHECK(v == doctest::Approx(2.0));
  }
  SUBCASE("matches a dense product") {
    std::mt19937_64 rng(17);
    auto p = normalized_adjacency(verify::random_graph(20, 0.25, rng));
    Matrix h = verify::random_matrix(20, 4, rng);
    CHECK(relative_frobenius_error(spmm(p, h), matmul(p.matrix.to_dense(), h)) <= 1e-13);
  }
  SUBCASE("dimension mismatch") {
    auto p = normalized_adjacency(testing::triangle());
    CHECK_THROWS_AS(spmm(p, Matrix(4, 1)), DimensionError);
  }
}

TEST_CASE("sqrt(d+1) is a unit eigenvector direction of P") {
  std::mt19937_64 rng(23);
  Graph g = verify::random_graph(40, 0.1, rng);
  auto p = normalized_adjacency(g);
  Matrix v(40, 1);
  for (std::size_t u = 0; u < 40; ++u) v(u, 0) = std::sqrt(g.weighted_degree(u) + 1.0);
  CHECK(frobenius_norm(spmm(p, v) - v) / frobenius_norm(v) <= 1e-10);
}

TEST_CASE("edge list parsing") {
  auto e = parse_edge_list("# comment\n0 1\n\n1 2 0.5\n");
  REQUIRE(e.size() == 2);
  CHECK(e[1].w == 0.5);
  SUBCASE("malformed line names its number") {
    try {
      parse_edge_list("0 1\n0 x\n", "edges.txt");
      FAIL("expected a parse error");
    } catch (const ParseError& err) {
      CHECK(err.line() == 2);
      CHECK(std::string(err.what()).find("edges.txt:2") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(parse_edge_list("0 1 2 3\n"), ParseError);
  CHECK_THROWS_AS(read_edge_list("/nonexistent/edges.txt"), std::runtime_error);
}

TEST_CASE("relabeling permutes adjacency") {
  Graph g = build_graph(std::vector<Edge>{{0, 1}, {1, 2}}, 3);
  std::vector<std::size_t> perm{2, 0, 1};
  Graph r = g.relabeled(perm);
  CHECK(r.adjacency().at(2, 0) == 1.0);
  CHECK(r.adjacency().at(0, 1) == 1.0);
  CHECK(r.adjacency().at(2, 1) == 0.0);
}
