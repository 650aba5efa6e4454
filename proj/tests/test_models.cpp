#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "clenshaw/linear_filters.hpp"
#include "clenshaw/models.hpp"
#include "clenshaw/spectral.hpp"
#include "clenshaw/verify.hpp"
#include "test_helpers.hpp"

using namespace clenshaw;

namespace {

struct Instance {
  explicit Instance(std::uint64_t seed, std::size_t n = 20, std::size_t f = 4) : rng(seed) {
    g = verify::random_graph(n, 0.25, rng);
    p = normalized_adjacency(g);
    x = verify::random_matrix(n, f, rng);
  }
  std::mt19937_64 rng;
  Graph g;
  PropagationOperator p;
  Matrix x;
};

ModelConfig config(Variant v, int K, std::size_t hidden = 6) {
  ModelConfig c;
  c.variant = v;
  c.K = K;
  c.hidden = hidden;
  return c;
}

Matrix propagate_linear(ModelParams& params, const Instance& inst) {
  ad::Tape t;
  return t.value(propagate(t, params, inst.p, t.constant(inst.x), ForwardMode{ad::Mode::Eval, true, 0}));
}

}  // namespace

TEST_CASE("beta schedule") {
  CHECK(identity_mapping_beta(0.5, 0) == doctest::Approx(std::log(1.5)));
  CHECK(identity_mapping_beta(0.5, 3) == doctest::Approx(std::log(1.125)));
  CHECK(identity_mapping_beta(0.0, 2) == 0.0);
}

TEST_CASE("config validation and names") {
  CHECK_NOTHROW(ModelConfig{}.validate());
  ModelConfig c;
  c.K = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.fixed_alpha = 2.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  for (Variant v : {Variant::Clenshaw, Variant::Horner, Variant::FixedParam, Variant::Gcn, Variant::Gcnii}) {
    CHECK(parse_variant(to_string(v)) == v);
  }
  CHECK_THROWS_AS(parse_variant("appnp"), std::invalid_argument);
}

TEST_CASE("initialization") {
  ModelParams p = init_params(config(Variant::Clenshaw, 4), 5, 3);
  REQUIRE(p.alphas.size() == 5);
  for (std::size_t l = 0; l < 4; ++l) CHECK(p.alphas[l].value(0, 0) == 0.0);
  CHECK(p.alphas[4].value(0, 0) == 1.0);
  CHECK(p.layer_w.size() == 5);
  CHECK(p.in_features() == 5);
  CHECK(p.num_classes() == 3);
  const double bound = 1.0 / std::sqrt(5.0);
  for (double v : p.pre_w.value.values()) CHECK(std::abs(v) <= bound);
  ModelParams q = init_params(config(Variant::Clenshaw, 4), 5, 3);
  CHECK(p.pre_w.value == q.pre_w.value);
  CHECK(init_params(config(Variant::FixedParam, 4), 5, 3).alpha_group().empty());
  CHECK(init_params(config(Variant::Gcn, 4), 5, 3).layer_w.size() == 4);
}

TEST_CASE("linear mode reproduces the linear recurrences") {
  Instance inst(1);
  SUBCASE("fresh clenshaw is the identity filter") {
    ModelParams p = init_params(config(Variant::Clenshaw, 7), 4, 2);
    CHECK(max_abs_diff(propagate_linear(p, inst), inst.x) <= 1e-12);
  }
  SUBCASE("clenshaw with random residues") {
    ModelParams p = init_params(config(Variant::Clenshaw, 5), 4, 2);
    std::vector<double> a;
    for (auto& al : p.alphas) a.push_back(al.value(0, 0) = verify::uniform(inst.rng, -1, 1));
    CHECK(relative_frobenius_error(propagate_linear(p, inst), clenshaw_propagate_linear(inst.p, inst.x, a, 5).final_state()) <= 1e-12);
  }
  SUBCASE("horner") {
    ModelParams p = init_params(config(Variant::Horner, 3), 4, 2);
    std::vector<double> a;
    for (auto& al : p.alphas) a.push_back(al.value(0, 0) = verify::uniform(inst.rng, -1, 1));
    CHECK(relative_frobenius_error(propagate_linear(p, inst), horner_propagate_linear(inst.p, inst.x, a, 3).final_state()) <= 1e-12);
  }
  SUBCASE("horner K=1 with alpha=(1,0) is one propagation step") {
    ModelParams p = init_params(config(Variant::Horner, 1), 4, 2);
    p.alphas[0].value(0, 0) = 1.0;
    p.alphas[1].value(0, 0) = 0.0;
    CHECK(max_abs_diff(propagate_linear(p, inst), spmm(inst.p, inst.x)) <= 1e-15);
  }
  SUBCASE("fixed-param") {
    ModelConfig c = config(Variant::FixedParam, 2);
    c.fixed_alpha = 0.5;
    ModelParams p = init_params(c, 4, 2);
    auto oracle = apply_filter_exact(eig_sym(inst.p.matrix.to_dense()), CoeffVector({0.5, 0.25, 0.25}, Basis::ChebyshevU), inst.x);
    CHECK(relative_frobenius_error(propagate_linear(p, inst), oracle) <= 1e-9);
    c.fixed_alpha = 1.0;
    ModelParams q = init_params(c, 4, 2);
    CHECK(max_abs_diff(propagate_linear(q, inst), inst.x) <= 1e-15);
  }
  SUBCASE("gcn single layer") {
    ModelParams p = init_params(config(Variant::Gcn, 1), 4, 2);
    CHECK(max_abs_diff(propagate_linear(p, inst), spmm(inst.p, inst.x)) <= 1e-15);
  }
  SUBCASE("gcnii") {
    ModelConfig c = config(Variant::Gcnii, 6);
    c.fixed_alpha = 0.2;
    ModelParams p = init_params(c, 4, 2);
    CHECK(relative_frobenius_error(propagate_linear(p, inst), gcnii_propagate_linear(inst.p, inst.x, 0.2, 6)) <= 1e-12);
    c.fixed_alpha = 1.0;
    ModelParams q = init_params(c, 4, 2);
    CHECK(max_abs_diff(propagate_linear(q, inst), inst.x) <= 1e-15);
  }
}

TEST_CASE("nonlinear forward shapes and K=0") {
  Instance inst(2);
  for (Variant v : {Variant::Clenshaw, Variant::Horner, Variant::FixedParam, Variant::Gcn, Variant::Gcnii}) {
    for (int K : {0, 2}) {
      ModelParams p = init_params(config(v, K), 4, 3);
      ad::Tape t;
      const Matrix& out = t.value(forward(t, p, inst.p, inst.x, ForwardMode{}));
      CHECK(out.rows() == 20);
      CHECK(out.cols() == 3);
      CHECK(all_finite(out));
    }
  }
  ModelParams p = init_params(config(Variant::Clenshaw, 2), 5, 3);
  ad::Tape t;
  CHECK_THROWS_AS(forward(t, p, inst.p, inst.x, ForwardMode{}), DimensionError);
}

TEST_CASE("fixed-param residues never reach the optimizer") {
  ModelConfig c = config(Variant::FixedParam, 3);
  ModelParams p = init_params(c, 4, 2);
  CHECK(p.alpha_group().empty());
  for (auto* prm : p.all()) CHECK(prm->group == ad::ParamGroup::Weight);
  CHECK(p.effective_alphas().size() == 4);
}

TEST_CASE("predict breaks ties to the lowest class") {
  CHECK(predict(Matrix(1, 3, {0.2, 0.9, 0.1})) == std::vector<int>{1});
  CHECK(predict(Matrix(1, 3, {0.5, 0.5, 0.1})) == std::vector<int>{0});
}

TEST_CASE("checkpoint round trip") {
  ModelConfig c = config(Variant::Clenshaw, 3);
  c.seed = 42;
  ModelParams p = init_params(c, 4, 2);
  p.alphas[1].value(0, 0) = 0.1 + 0.2;
  ModelParams q = checkpoint_from_json(checkpoint_to_json(p));
  CHECK(q.config.K == 3);
  CHECK(q.config.seed == 42);
  CHECK(q.alphas[1].value(0, 0) == p.alphas[1].value(0, 0));
  auto pa = p.all();
  auto qa = q.all();
  REQUIRE(pa.size() == qa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == qa[i]->value);

  const auto path = std::filesystem::temp_directory_path() / "clenshaw_ckpt_test.json";
  save_checkpoint(p, path);
  CHECK(load_checkpoint(path).post_w.value == p.post_w.value);
  std::filesystem::remove(path);
  CHECK_THROWS(checkpoint_from_json("{}"));
}

TEST_CASE("config json round trip") {
  ModelConfig c;
  c.variant = Variant::Gcnii;
  c.lambda = 1.25;
  c.layer_dropout = false;
  ModelConfig d = config_from_json(config_to_json(c));
  CHECK(d.variant == Variant::Gcnii);
  CHECK(d.lambda == 1.25);
  CHECK_FALSE(d.layer_dropout);
  CHECK(config_from_json(nlohmann::json::object()).K == 16);
}

TEST_CASE("model-level verification checks pass") {
  for (const auto& c : verify::model_checks(3, 10)) {
    INFO(c.name << " worst " << c.worst_case);
    CHECK(c.passed());
  }
}
