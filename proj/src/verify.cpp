#include "clenshaw/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

#include "clenshaw/autograd.hpp"
#include "clenshaw/linear_filters.hpp"
#include "clenshaw/models.hpp"
#include "clenshaw/poly.hpp"
#include "clenshaw/spectral.hpp"

namespace clenshaw::verify {

void CheckResult::record(double error, const std::string& description) {
  ++cases;
  // NaN must register as a failure.
  if (std::isnan(error)) error = std::numeric_limits<double>::infinity();
  if (cases == 1 || error > max_error) {
    max_error = error;
    worst_case = description;
  }
}

bool Report::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed(); });
}

nlohmann::json Report::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"cases", c.cases},
                   {"max_error", c.max_error},
                   {"tolerance", c.tolerance},
                   {"passed", c.passed()},
                   {"worst_case", c.worst_case}});
  }
  return {{"suite", suite}, {"seed", seed}, {"trials", trials}, {"passed", passed()}, {"checks", arr}};
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo,
                     double hi) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = uniform(rng, lo, hi);
  return m;
}

Graph random_graph(std::size_t n, double p, std::mt19937_64& rng) {
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (uniform(rng, 0.0, 1.0) < p) {
        edges.push_back({static_cast<std::int64_t>(u), static_cast<std::int64_t>(v), 1.0});
      }
  return build_graph(edges, static_cast<std::int64_t>(n));
}

double gradient_relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return seed * 0x9E3779B97F4A7C15ULL ^ h;
}

std::string describe(std::initializer_list<std::pair<const char*, double>> kv) {
  std::string s;
  for (const auto& [k, v] : kv) {
    if (!s.empty()) s += ' ';
    char buf[64];
    if (v == std::floor(v) && std::abs(v) < 1e15) {
      std::snprintf(buf, sizeof buf, "%s=%.0f", k, v);
    } else {
      std::snprintf(buf, sizeof buf, "%s=%.17g", k, v);
    }
    s += buf;
  }
  return s;
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(rng, lo, hi);
  return v;
}

struct GraphInstance {
  Graph graph;
  PropagationOperator p;
  EigenDecomposition eig;
  SignalMatrix h_star;
};

GraphInstance make_instance(std::mt19937_64& rng, std::size_t n_lo, std::size_t n_hi,
                            std::size_t features) {
  const std::size_t n = uniform_index(rng, n_lo, n_hi);
  const double density = uniform(rng, 0.05, 0.3);
  GraphInstance inst;
  inst.graph = random_graph(n, density, rng);
  inst.p = normalized_adjacency(inst.graph);
  inst.eig = eig_sym(inst.p.matrix.to_dense());
  inst.h_star = random_matrix(n, features, rng);
  return inst;
}

// sum_l c_l M^l x by repeated application of M, independent of the
// spectral route.
SignalMatrix power_series(const std::function<SignalMatrix(const SignalMatrix&)>& apply,
                          const std::vector<double>& c, const SignalMatrix& x) {
  SignalMatrix acc(x.rows(), x.cols());
  SignalMatrix power = x;
  for (std::size_t l = 0; l < c.size(); ++l) {
    if (l > 0) power = apply(power);
    acc += c[l] * power;
  }
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scalar polynomial machinery

std::vector<CheckResult> clenshaw_scalar_checks(std::uint64_t seed, std::size_t cases) {
  std::mt19937_64 rng(derive_seed(seed, "clenshaw-scalar"));
  CheckResult equiv{"clenshaw_vs_direct_sum_u"};
  equiv.tolerance = 1e-12;
  for (std::size_t i = 0; i < cases; ++i) {
    const std::size_t degree = uniform_index(rng, 0, 32);
    CoeffVector c(random_vector(degree + 1, rng), Basis::ChebyshevU);
    const double x = uniform(rng, -1.0, 1.0);
    const double s = direct_sum_u(c, x);
    const double err = std::abs(clenshaw_sum_u(c, x) - s) / (1.0 + std::abs(s));
    equiv.record(err, describe({{"case", double(i)}, {"degree", double(degree)}, {"x", x}}));
  }

  CheckResult recurrence{"cheb_u_recurrence_self_consistency"};
  recurrence.tolerance = 0.0;
  CheckResult parity{"cheb_u_parity"};
  parity.tolerance = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    const double x = uniform(rng, -1.0, 1.0);
    for (int k = 0; k <= 16; ++k) {
      const double uk = cheb_u(k, x);
      if (k >= 1) {
        recurrence.record(std::abs(uk - (2.0 * x * cheb_u(k - 1, x) - cheb_u(k - 2, x))),
                          describe({{"k", double(k)}, {"x", x}}));
      }
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      parity.record(std::abs(cheb_u(k, -x) - sign * uk), describe({{"k", double(k)}, {"x", x}}));
    }
  }

  CheckResult trig{"cheb_u_trigonometric_identity"};
  trig.tolerance = 1e-12;
  for (std::size_t i = 0; i < 64; ++i) {
    const double theta = uniform(rng, 0.05, 3.09);
    const int n = static_cast<int>(uniform_index(rng, 0, 24));
    trig.record(std::abs(cheb_u(n, std::cos(theta)) * std::sin(theta) - std::sin((n + 1) * theta)),
                describe({{"n", double(n)}, {"theta", theta}}));
  }

  std::vector<CheckResult> out{equiv, recurrence, parity, trig};
  out.push_back(elimination_witness_check(seed));
  for (auto& c : basis_conversion_checks(seed)) out.push_back(std::move(c));
  return out;
}

CheckResult elimination_witness_check(std::uint64_t seed, std::size_t cases) {
  std::mt19937_64 rng(derive_seed(seed, "elimination-witness"));
  CheckResult r{"clenshaw_elimination_witness"};
  r.tolerance = 1e-12;
  for (std::size_t i = 0; i < cases; ++i) {
    const std::size_t degree = uniform_index(rng, 0, 32);
    CoeffVector c(random_vector(degree + 1, rng), Basis::ChebyshevU);
    const double x = uniform(rng, -1.0, 1.0);
    const auto b = clenshaw_b_sequence(c, x);
    const Matrix a = clenshaw_elimination_matrix(degree, x);
    // (b^T A)_j against the padded vector (0, a_0, ..., a_n).
    double worst = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k) v += b[k] * a(k, j);
      const double target = j == 0 ? 0.0 : c[j - 1];
      worst = std::max(worst, std::abs(v - target));
    }
    // The witness also pins S(x) = b_0.
    worst = std::max(worst, std::abs(b[1] - clenshaw_sum_u(c, x)));
    r.record(worst, describe({{"case", double(i)}, {"degree", double(degree)}, {"x", x}}));
  }
  return r;
}

std::vector<CheckResult> basis_conversion_checks(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "basis-conversion"));
  CheckResult pure{"u4_to_monomial_exact"};
  pure.tolerance = 0.0;
  {
    const auto m = u_basis_to_monomial(CoeffVector({0, 0, 0, 0, 1}, Basis::ChebyshevU));
    const std::vector<double> expected{1, 0, -12, 0, 16};
    double err = m.size() == expected.size() ? 0.0 : 1.0;
    for (std::size_t i = 0; i < std::min(m.size(), expected.size()); ++i) {
      err = std::max(err, std::abs(m[i] - expected[i]));
    }
    pure.record(err, "U_4");
  }

  CheckResult eval{"u_to_monomial_evaluation_degree8"};
  eval.tolerance = 1e-10;
  for (std::size_t i = 0; i < 50; ++i) {
    CoeffVector c(random_vector(9, rng), Basis::ChebyshevU);
    const auto m = u_basis_to_monomial(c);
    for (int j = 0; j < 21; ++j) {
      const double x = std::cos(M_PI * (j + 0.5) / 21.0);
      eval.record(std::abs(horner_eval(m, x) - clenshaw_sum_u(c, x)),
                  describe({{"case", double(i)}, {"x", x}}));
    }
  }

  // Monomial coefficients of degree-24 U-series reach ~1e8, so rounding them
  // to doubles alone moves p(1) by ~1e-8. Absolute agreement is checked up to
  // degree 14; up to degree 24 the error is scaled by sum_j |m_j| |x|^j.
  CheckResult absolute{"u_to_monomial_evaluation_degree14"};
  absolute.tolerance = 1e-10;
  CheckResult scaled{"u_to_monomial_evaluation_degree24_scaled"};
  scaled.tolerance = 1e-10;
  for (std::size_t i = 0; i < 50; ++i) {
    const std::size_t degree = uniform_index(rng, 0, 24);
    CoeffVector c(random_vector(degree + 1, rng), Basis::ChebyshevU);
    const auto m = u_basis_to_monomial(c);
    for (double x : uniform_grid(41)) {
      const double err = std::abs(horner_eval(m, x) - clenshaw_sum_u(c, x));
      double magnitude = 0.0;
      for (std::size_t j = m.size(); j-- > 0;) magnitude = magnitude * std::abs(x) + std::abs(m[j]);
      const auto tag = describe({{"case", double(i)}, {"degree", double(degree)}, {"x", x}});
      scaled.record(err / std::max(1.0, magnitude), tag);
      if (degree <= 14) absolute.record(err, tag);
    }
  }
  return {pure, eval, absolute, scaled};
}

// ---------------------------------------------------------------------------
// Spectral oracle and graph operators

std::vector<CheckResult> spectral_checks(std::uint64_t seed, std::size_t trials) {
  std::mt19937_64 rng(derive_seed(seed, "spectral"));
  CheckResult ortho{"eig_orthonormality"};
  ortho.tolerance = 1e-10;
  CheckResult recon{"eig_reconstruction"};
  recon.tolerance = 1e-9;
  CheckResult range{"p_spectrum_in_unit_interval"};
  range.tolerance = 1e-9;
  CheckResult top{"p_max_eigenvalue_is_one"};
  top.tolerance = 1e-9;
  CheckResult sym{"p_symmetry"};
  sym.tolerance = 1e-12;
  CheckResult stationary{"p_sqrt_degree_eigenvector"};
  stationary.tolerance = 1e-10;
  CheckResult lap{"laplacian_spectrum_shift"};
  lap.tolerance = 1e-9;
  CheckResult dense{"spmm_vs_dense"};
  dense.tolerance = 1e-13;
  CheckResult compose{"filter_composition"};
  compose.tolerance = 1e-9;
  CheckResult linear{"filter_linearity"};
  linear.tolerance = 1e-10;
  CheckResult basis{"filter_basis_consistency"};
  basis.tolerance = 1e-9;

  for (std::size_t t = 0; t < trials; ++t) {
    GraphInstance inst = make_instance(rng, 4, 40, 3);
    const std::size_t n = inst.graph.num_nodes();
    const auto tag = describe({{"trial", double(t)}, {"n", double(n)}});
    const Matrix pd = inst.p.matrix.to_dense();
    const auto& d = inst.eig;

    Matrix gram = matmul(transpose(d.vectors), d.vectors);
    ortho.record(max_abs_diff(gram, Matrix::identity(n)), tag);
    recon.record(relative_frobenius_error(d.reconstruct(), pd), tag);
    double out_of_range = 0.0;
    for (double mu : d.mu) out_of_range = std::max({out_of_range, -1.0 - mu, mu - 1.0});
    range.record(std::max(out_of_range, 0.0), tag);
    top.record(std::abs(d.mu.back() - 1.0), tag);
    sym.record(max_abs_diff(pd, transpose(pd)), tag);

    Matrix v(n, 1);
    for (std::size_t u = 0; u < n; ++u) v(u, 0) = std::sqrt(inst.graph.weighted_degree(u) + 1.0);
    stationary.record(frobenius_norm(spmm(inst.p, v) - v) / frobenius_norm(v), tag);

    const auto ld = eig_sym(laplacian(inst.p).matrix.to_dense());
    double lap_err = 0.0;
    auto lam = d.lambda();
    std::sort(lam.begin(), lam.end());
    for (std::size_t i = 0; i < n; ++i) lap_err = std::max(lap_err, std::abs(ld.mu[i] - lam[i]));
    lap.record(lap_err, tag);

    dense.record(relative_frobenius_error(spmm(inst.p, inst.h_star), matmul(pd, inst.h_star)), tag);

    CoeffVector h1(random_vector(uniform_index(rng, 1, 4), rng), Basis::Monomial);
    CoeffVector h2(random_vector(uniform_index(rng, 1, 3), rng), Basis::Monomial);
    const auto twice = apply_filter_exact(d, h2, apply_filter_exact(d, h1, inst.h_star));
    compose.record(
        relative_frobenius_error(twice, apply_filter_exact(d, monomial_product(h1, h2), inst.h_star)),
        tag);

    auto c1 = random_vector(6, rng);
    auto c2 = random_vector(6, rng);
    std::vector<double> c12(6);
    for (std::size_t i = 0; i < 6; ++i) c12[i] = c1[i] + c2[i];
    const auto split_sum = apply_filter_exact(d, CoeffVector(c1, Basis::ChebyshevU), inst.h_star) +
                           apply_filter_exact(d, CoeffVector(c2, Basis::ChebyshevU), inst.h_star);
    linear.record(max_abs_diff(split_sum,
                               apply_filter_exact(d, CoeffVector(c12, Basis::ChebyshevU), inst.h_star)),
                  tag);

    CoeffVector cu(random_vector(uniform_index(rng, 1, 9), rng), Basis::ChebyshevU);
    basis.record(relative_frobenius_error(apply_filter_exact(d, u_basis_to_monomial(cu), inst.h_star),
                                          apply_filter_exact(d, cu, inst.h_star)),
                 tag);
  }
  return {ortho, recon, range, top, sym, stationary, lap, dense, compose, linear, basis};
}

// ---------------------------------------------------------------------------
// Linearized propagation theorems

std::vector<CheckResult> theorem1_checks(std::uint64_t seed, std::size_t trials) {
  std::mt19937_64 rng(derive_seed(seed, "theorem1"));
  CheckResult final_state{"horner_equals_monomial_filter"};
  final_state.tolerance = 1e-9;
  CheckResult layerwise{"horner_layerwise_expansion"};
  layerwise.tolerance = 1e-9;
  for (std::size_t t = 0; t < trials; ++t) {
    GraphInstance inst = make_instance(rng, 10, 50, 5);
    const int K = static_cast<int>(uniform_index(rng, 1, 10));
    const auto alphas = random_vector(static_cast<std::size_t>(K) + 1, rng);
    const auto tag = describe({{"trial", double(t)}, {"n", double(inst.graph.num_nodes())},
                               {"K", double(K)}, {"seed", double(seed)}});
    const auto trace = horner_propagate_linear(inst.p, inst.h_star, alphas, K);
    const auto oracle =
        apply_filter_exact(inst.eig, layer_to_basis(alphas, Basis::Monomial), inst.h_star);
    final_state.record(relative_frobenius_error(trace.final_state(), oracle), tag);
    double worst = 0.0;
    for (int l = 0; l <= K; ++l) {
      std::vector<double> prefix(alphas.begin(), alphas.begin() + l + 1);
      const auto ref =
          apply_filter_exact(inst.eig, layer_to_basis(prefix, Basis::Monomial), inst.h_star);
      worst = std::max(worst, relative_frobenius_error(trace.state(l), ref));
    }
    layerwise.record(worst, tag);
  }
  return {final_state, layerwise};
}

std::vector<CheckResult> theorem2_checks(std::uint64_t seed, std::size_t trials) {
  std::mt19937_64 rng(derive_seed(seed, "theorem2"));
  CheckResult final_state{"clenshaw_equals_chebyshev_u_filter"};
  final_state.tolerance = 1e-9;
  CheckResult induction{"clenshaw_induction_witness"};
  induction.tolerance = 1e-9;
  CheckResult order{"clenshaw_coefficient_order"};
  order.tolerance = 1e-9;
  for (std::size_t t = 0; t < trials; ++t) {
    GraphInstance inst = make_instance(rng, 10, 50, 5);
    const int K = static_cast<int>(uniform_index(rng, 1, 10));
    const auto alphas = random_vector(static_cast<std::size_t>(K) + 1, rng);
    const auto tag = describe({{"trial", double(t)}, {"n", double(inst.graph.num_nodes())},
                               {"K", double(K)}, {"seed", double(seed)}});
    const auto trace = clenshaw_propagate_linear(inst.p, inst.h_star, alphas, K);
    const auto oracle =
        apply_filter_exact(inst.eig, layer_to_basis(alphas, Basis::ChebyshevU), inst.h_star);
    final_state.record(relative_frobenius_error(trace.final_state(), oracle), tag);

    // h^(l)(mu) = alpha_l + 2 mu h^(l-1)(mu) - h^(l-2)(mu), per eigenvalue.
    const std::size_t n = inst.eig.size();
    std::vector<double> h2(n, 0.0);
    std::vector<double> h1(n, 0.0);
    double worst = 0.0;
    for (int l = 0; l <= K; ++l) {
      std::vector<double> h(n);
      for (std::size_t i = 0; i < n; ++i) {
        h[i] = alphas[static_cast<std::size_t>(l)] + 2.0 * inst.eig.mu[i] * h1[i] - h2[i];
      }
      const auto ref = apply_spectral_response(inst.eig, h, inst.h_star);
      worst = std::max(worst, relative_frobenius_error(trace.state(l), ref));
      h2 = std::move(h1);
      h1 = std::move(h);
    }
    induction.record(worst, tag);

    // alpha = (1, 0, ..., 0) must produce U_K(P) H*, not U_0.
    std::vector<double> first(static_cast<std::size_t>(K) + 1, 0.0);
    first[0] = 1.0;
    std::vector<double> uk(inst.eig.size());
    for (std::size_t i = 0; i < uk.size(); ++i) uk[i] = cheb_u(K, inst.eig.mu[i]);
    order.record(
        relative_frobenius_error(clenshaw_propagate_linear(inst.p, inst.h_star, first, K).final_state(),
                                 apply_spectral_response(inst.eig, uk, inst.h_star)),
        tag);
  }
  return {final_state, induction, order};
}

std::vector<CheckResult> gcnii_unfold_checks(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "gcnii-unfold"));
  CheckResult unfold{"gcnii_unfolded_series"};
  unfold.tolerance = 1e-10;
  CheckResult spectral{"gcnii_equals_monomial_filter"};
  spectral.tolerance = 1e-9;
  CheckResult fixed_sum{"fixed_param_coefficients_sum_to_one"};
  fixed_sum.tolerance = 1e-12;
  CheckResult fixed_filter{"fixed_param_equals_chebyshev_u_filter"};
  fixed_filter.tolerance = 1e-9;
  CheckResult delta{"delta_residue_unfolds_to_2p_minus_i"};
  delta.tolerance = 1e-10;

  GraphInstance inst = make_instance(rng, 25, 25, 4);
  auto apply_p = [&](const SignalMatrix& h) { return spmm(inst.p, h); };
  for (double alpha : {0.0, 0.1, 0.5, 1.0}) {
    for (int K : {1, 6}) {
      const auto tag = describe({{"alpha", alpha}, {"K", double(K)}});
      std::vector<double> hat(static_cast<std::size_t>(K) + 1);
      for (int l = 0; l < K; ++l) hat[static_cast<std::size_t>(l)] = alpha * std::pow(1.0 - alpha, l);
      hat[static_cast<std::size_t>(K)] = std::pow(1.0 - alpha, K);
      const auto got = gcnii_propagate_linear(inst.p, inst.h_star, alpha, K);
      unfold.record(relative_frobenius_error(got, power_series(apply_p, hat, inst.h_star)), tag);
      spectral.record(relative_frobenius_error(
                          got, apply_filter_exact(inst.eig, gcnii_unfolded_coefficients(alpha, K),
                                                  inst.h_star)),
                      tag);

      const auto fixed = fixed_param_coefficients(alpha, K);
      double s = 0.0;
      for (double c : fixed.coeffs()) s += c;
      fixed_sum.record(std::abs(s - 1.0), tag);
      const std::vector<double> layer(fixed.coeffs().begin(), fixed.coeffs().end());
      fixed_filter.record(
          relative_frobenius_error(
              clenshaw_propagate_linear(inst.p, inst.h_star, layer, K).final_state(),
              apply_filter_exact(inst.eig, layer_to_basis(layer, Basis::ChebyshevU), inst.h_star)),
          tag);
    }
  }

  auto apply_2p_minus_i = [&](const SignalMatrix& h) { return 2.0 * spmm(inst.p, h) - h; };
  for (int K : {3, 7}) {
    const auto alphas = random_vector(static_cast<std::size_t>(K) + 1, rng);
    std::vector<double> reversed(alphas.rbegin(), alphas.rend());
    const auto got = delta_residue_propagate_linear(inst.p, inst.h_star, alphas, K).final_state();
    delta.record(relative_frobenius_error(got, power_series(apply_2p_minus_i, reversed, inst.h_star)),
                 describe({{"K", double(K)}}));
  }
  return {unfold, spectral, fixed_sum, fixed_filter, delta};
}

// ---------------------------------------------------------------------------
// Reverse-mode gradients

namespace {

using LossBuilder = std::function<ad::Var(ad::Tape&)>;

double loss_value(const LossBuilder& build, std::vector<bool>* pattern) {
  ad::Tape t;
  ad::Var l = build(t);
  if (pattern != nullptr) *pattern = t.activation_pattern();
  return t.value(l)(0, 0);
}

// Central differences on sampled coordinates. Coordinates whose +-h
// evaluations land on different ReLU pieces are not differentiable at the
// probe scale and are replaced by fresh draws.
CheckResult finite_difference_check(const std::string& name,
                                    const std::vector<ad::Parameter*>& params,
                                    const LossBuilder& build, std::mt19937_64& rng,
                                    std::size_t coords_per_param, double h = 1e-6) {
  CheckResult r{name};
  r.tolerance = 1e-4;
  for (ad::Parameter* p : params) p->zero_grad();
  {
    ad::Tape t;
    ad::Var l = build(t);
    t.backward(l);
  }
  for (ad::Parameter* p : params) {
    const std::size_t size = p->value.size();
    std::vector<std::size_t> coords(size);
    std::iota(coords.begin(), coords.end(), 0);
    for (std::size_t i = size; i > 1; --i) std::swap(coords[i - 1], coords[rng() % i]);
    std::size_t checked = 0;
    for (std::size_t idx : coords) {
      if (checked >= coords_per_param) break;
      double& slot = p->value.values()[idx];
      const double saved = slot;
      std::vector<bool> pat_plus;
      std::vector<bool> pat_minus;
      slot = saved + h;
      const double lp = loss_value(build, &pat_plus);
      slot = saved - h;
      const double lm = loss_value(build, &pat_minus);
      slot = saved;
      if (pat_plus != pat_minus) continue;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = p->grad.values()[idx];
      r.record(gradient_relative_error(analytic, numeric),
               p->name + "[" + std::to_string(idx) + "] analytic=" + std::to_string(analytic) +
                   " numeric=" + std::to_string(numeric));
      ++checked;
    }
  }
  return r;
}

// Weighted sum so that every output entry carries a distinct sensitivity.
ad::Var weighted_sum(ad::Tape& t, ad::Var out, const Matrix& weights) {
  return ad::sum(t, ad::matmul(t, out, t.constant(weights)));
}

Matrix away_from_zero(Matrix m) {
  for (double& v : m.values())
    if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
  return m;
}

}  // namespace

std::vector<CheckResult> gradient_checks(std::uint64_t seed, std::size_t coords_per_param) {
  std::mt19937_64 rng(derive_seed(seed, "gradients"));
  std::vector<CheckResult> out;
  const std::size_t n = 12;
  const Graph g = random_graph(n, 0.3, rng);
  const PropagationOperator p = normalized_adjacency(g);

  ad::Parameter a("a", random_matrix(n, 4, rng), ad::ParamGroup::Weight);
  ad::Parameter b("b", random_matrix(4, 3, rng), ad::ParamGroup::Weight);
  ad::Parameter c("c", random_matrix(n, 4, rng), ad::ParamGroup::Weight);
  ad::Parameter s("s", Matrix(1, 1, 0.7), ad::ParamGroup::Alpha);
  ad::Parameter bias("bias", random_matrix(1, 4, rng), ad::ParamGroup::Weight);
  ad::Parameter w("w", random_matrix(4, 4, rng), ad::ParamGroup::Weight);
  ad::Parameter r("r", away_from_zero(random_matrix(n, 4, rng)), ad::ParamGroup::Weight);
  const Matrix w3 = random_matrix(3, 1, rng);
  const Matrix w4 = random_matrix(4, 1, rng);
  std::vector<int> labels(n);
  for (auto& y : labels) y = static_cast<int>(uniform_index(rng, 0, 3));
  std::vector<std::size_t> mask{0, 2, 3, 5, 7, 11};

  out.push_back(finite_difference_check(
      "grad_matmul", {&a, &b},
      [&](ad::Tape& t) { return weighted_sum(t, ad::matmul(t, t.param(a), t.param(b)), w3); }, rng,
      coords_per_param));
  out.push_back(finite_difference_check(
      "grad_spmm_const", {&a},
      [&](ad::Tape& t) { return weighted_sum(t, ad::spmm_const(t, p, t.param(a)), w4); }, rng,
      coords_per_param));
  out.push_back(finite_difference_check(
      "grad_add_sub", {&a, &c},
      [&](ad::Tape& t) {
        ad::Var av = t.param(a);
        ad::Var cv = t.param(c);
        return weighted_sum(t, ad::sub(t, ad::add(t, av, cv), ad::scale(t, cv, 3.0)), w4);
      },
      rng, coords_per_param));
  out.push_back(finite_difference_check(
      "grad_scale_by_scalar_node", {&a, &s},
      [&](ad::Tape& t) { return weighted_sum(t, ad::scale(t, t.param(a), t.param(s)), w4); }, rng,
      coords_per_param));
  out.push_back(finite_difference_check(
      "grad_add_row_bias", {&a, &bias},
      [&](ad::Tape& t) { return weighted_sum(t, ad::add_row_bias(t, t.param(a), t.param(bias)), w4); },
      rng, coords_per_param));
  out.push_back(finite_difference_check(
      "grad_relu", {&r},
      [&](ad::Tape& t) { return weighted_sum(t, ad::relu(t, t.param(r)), w4); }, rng,
      coords_per_param));
  out.push_back(finite_difference_check(
      "grad_dropout_train", {&a},
      [&](ad::Tape& t) {
        return weighted_sum(t, ad::dropout(t, t.param(a), 0.4, 12345, ad::Mode::Train), w4);
      },
      rng, coords_per_param));
  out.push_back(finite_difference_check(
      "grad_log_softmax_nll", {&a},
      [&](ad::Tape& t) {
        return ad::nll_loss(t, ad::log_softmax_rows(t, t.param(a)), labels, mask);
      },
      rng, coords_per_param));
  out.push_back(finite_difference_check(
      "grad_identity_mapping", {&a, &w},
      [&](ad::Tape& t) {
        return weighted_sum(t, ad::identity_mapping(t, t.param(a), t.param(w), 0.3), w4);
      },
      rng, coords_per_param));

  // Composed models: n = 20 nodes, K = 4, hidden = 8.
  const std::size_t mn = 20;
  const Graph mg = random_graph(mn, 0.25, rng);
  const PropagationOperator mp = normalized_adjacency(mg);
  const Matrix x = random_matrix(mn, 5, rng);
  std::vector<int> my(mn);
  for (auto& y : my) y = static_cast<int>(uniform_index(rng, 0, 2));
  std::vector<std::size_t> all(mn);
  std::iota(all.begin(), all.end(), 0);
  for (Variant v : {Variant::Clenshaw, Variant::Horner, Variant::FixedParam, Variant::Gcn,
                    Variant::Gcnii}) {
    ModelConfig cfg;
    cfg.K = 4;
    cfg.hidden = 8;
    cfg.variant = v;
    cfg.fixed_alpha = 0.2;
    cfg.dropout = 0.0;
    cfg.seed = seed;
    ModelParams mparams = init_params(cfg, 5, 3);
    for (auto& al : mparams.alphas) al.value(0, 0) = uniform(rng, -1.0, 1.0);
    out.push_back(finite_difference_check(
        "grad_model_" + std::string(to_string(v)), mparams.all(),
        [&](ad::Tape& t) {
          ad::Var logits = forward(t, mparams, mp, x, ForwardMode{});
          return ad::nll_loss(t, ad::log_softmax_rows(t, logits), my, all);
        },
        rng, coords_per_param));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Models in linear mode

std::vector<CheckResult> model_checks(std::uint64_t seed, std::size_t trials) {
  std::mt19937_64 rng(derive_seed(seed, "models"));
  CheckResult lin_clenshaw{"linear_mode_clenshaw_matches_recurrence"};
  CheckResult lin_horner{"linear_mode_horner_matches_recurrence"};
  CheckResult lin_fixed{"linear_mode_fixed_param_matches_recurrence"};
  CheckResult lin_gcnii{"linear_mode_gcnii_matches_recurrence"};
  CheckResult lin_gcn{"linear_mode_gcn_matches_power"};
  for (auto* c : {&lin_clenshaw, &lin_horner, &lin_fixed, &lin_gcnii, &lin_gcn}) c->tolerance = 1e-12;
  CheckResult oracle{"linear_mode_matches_spectral_oracle"};
  oracle.tolerance = 1e-9;
  CheckResult init{"initial_filter_is_identity"};
  init.tolerance = 1e-12;
  CheckResult perm{"permutation_equivariance"};
  perm.tolerance = 1e-12;
  CheckResult shape{"logits_shape_contract"};
  shape.tolerance = 0.0;

  const ForwardMode linear{ad::Mode::Eval, true, 0};
  for (std::size_t t = 0; t < trials; ++t) {
    GraphInstance inst = make_instance(rng, 10, 30, 4);
    const int K = static_cast<int>(uniform_index(rng, 0, 6));
    const double fixed_alpha = uniform(rng, 0.0, 1.0);
    const auto tag = describe({{"trial", double(t)}, {"n", double(inst.graph.num_nodes())},
                               {"K", double(K)}, {"seed", double(seed)}});

    auto run = [&](Variant v, const std::vector<double>* alphas) {
      ModelConfig cfg;
      cfg.K = K;
      cfg.hidden = 4;
      cfg.variant = v;
      cfg.fixed_alpha = fixed_alpha;
      cfg.seed = seed + t;
      ModelParams mp = init_params(cfg, 4, 2);
      if (alphas != nullptr)
        for (std::size_t l = 0; l < mp.alphas.size(); ++l) mp.alphas[l].value(0, 0) = (*alphas)[l];
      ad::Tape tape;
      ad::Var out = propagate(tape, mp, inst.p, tape.constant(inst.h_star), linear);
      return tape.value(out);
    };

    const auto alphas = random_vector(static_cast<std::size_t>(K) + 1, rng);
    const auto cl = run(Variant::Clenshaw, &alphas);
    lin_clenshaw.record(
        relative_frobenius_error(cl, clenshaw_propagate_linear(inst.p, inst.h_star, alphas, K).final_state()),
        tag);
    oracle.record(relative_frobenius_error(
                      cl, apply_filter_exact(inst.eig, layer_to_basis(alphas, Basis::ChebyshevU),
                                             inst.h_star)),
                  tag + " variant=clenshaw");

    const auto ho = run(Variant::Horner, &alphas);
    lin_horner.record(
        relative_frobenius_error(ho, horner_propagate_linear(inst.p, inst.h_star, alphas, K).final_state()),
        tag);
    oracle.record(relative_frobenius_error(
                      ho, apply_filter_exact(inst.eig, layer_to_basis(alphas, Basis::Monomial),
                                             inst.h_star)),
                  tag + " variant=horner");

    const auto fx = run(Variant::FixedParam, nullptr);
    const auto fc = fixed_param_coefficients(fixed_alpha, K);
    const std::vector<double> fl(fc.coeffs().begin(), fc.coeffs().end());
    lin_fixed.record(
        relative_frobenius_error(fx, clenshaw_propagate_linear(inst.p, inst.h_star, fl, K).final_state()),
        tag);
    oracle.record(relative_frobenius_error(
                      fx, apply_filter_exact(inst.eig, layer_to_basis(fl, Basis::ChebyshevU),
                                             inst.h_star)),
                  tag + " variant=fixed-param");

    const auto gi = run(Variant::Gcnii, nullptr);
    lin_gcnii.record(
        relative_frobenius_error(gi, gcnii_propagate_linear(inst.p, inst.h_star, fixed_alpha, K)), tag);
    oracle.record(relative_frobenius_error(
                      gi, apply_filter_exact(inst.eig, gcnii_unfolded_coefficients(fixed_alpha, K),
                                             inst.h_star)),
                  tag + " variant=gcnii");

    const auto gc = run(Variant::Gcn, nullptr);
    SignalMatrix pk = inst.h_star;
    for (int l = 0; l < K; ++l) pk = spmm(inst.p, pk);
    lin_gcn.record(relative_frobenius_error(gc, pk), tag);
    std::vector<double> mono(static_cast<std::size_t>(K) + 1, 0.0);
    mono.back() = 1.0;
    oracle.record(relative_frobenius_error(
                      gc, apply_filter_exact(inst.eig, CoeffVector(mono, Basis::Monomial), inst.h_star)),
                  tag + " variant=gcn");

    init.record(relative_frobenius_error(run(Variant::Clenshaw, nullptr), inst.h_star), tag);

    // Nonlinear eval-mode forward commutes with node relabeling.
    {
      const std::size_t n = inst.graph.num_nodes();
      std::vector<std::size_t> relabel(n);
      std::iota(relabel.begin(), relabel.end(), 0);
      for (std::size_t i = n; i > 1; --i) std::swap(relabel[i - 1], relabel[rng() % i]);
      const PropagationOperator pp = normalized_adjacency(inst.graph.relabeled(relabel));
      Matrix px(n, inst.h_star.cols());
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t j = 0; j < px.cols(); ++j)
          px(relabel[u], j) = inst.h_star(u, j);
      ModelConfig cfg;
      cfg.K = K;
      cfg.hidden = 6;
      cfg.seed = seed + t;
      ModelParams mp = init_params(cfg, 4, 3);
      for (auto& al : mp.alphas) al.value(0, 0) = uniform(rng, -1.0, 1.0);
      ad::Tape t1;
      const Matrix base = t1.value(forward(t1, mp, inst.p, inst.h_star, ForwardMode{}));
      ad::Tape t2;
      const Matrix permuted = t2.value(forward(t2, mp, pp, px, ForwardMode{}));
      Matrix back(n, base.cols());
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t j = 0; j < back.cols(); ++j)
          back(u, j) = permuted(relabel[u], j);
      perm.record(relative_frobenius_error(back, base), tag);
    }

    for (Variant v : {Variant::Clenshaw, Variant::Horner, Variant::FixedParam, Variant::Gcn,
                      Variant::Gcnii}) {
      ModelConfig cfg;
      cfg.K = K;
      cfg.hidden = 5;
      cfg.variant = v;
      cfg.seed = seed + t;
      ModelParams mp = init_params(cfg, 4, 3);
      ad::Tape tape;
      const Matrix logits = tape.value(forward(tape, mp, inst.p, inst.h_star, ForwardMode{}));
      const bool ok = logits.rows() == inst.graph.num_nodes() && logits.cols() == 3 &&
                      all_finite(logits);
      shape.record(ok ? 0.0 : 1.0, tag + " variant=" + std::string(to_string(v)));
    }
  }
  return {lin_clenshaw, lin_horner, lin_fixed, lin_gcnii, lin_gcn, oracle, init, perm, shape};
}

// ---------------------------------------------------------------------------
// Suites

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"clenshaw-scalar", "spectral", "theorem1",
                                              "theorem2",        "gcnii-unfold", "gradients",
                                              "models",          "all"};
  return names;
}

bool is_suite(std::string_view name) {
  const auto& names = suite_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

Report run_suite(std::string_view suite, std::uint64_t seed, std::size_t trials) {
  if (!is_suite(suite)) throw std::invalid_argument("unknown suite: " + std::string(suite));
  Report report{std::string(suite), seed, trials, {}};
  auto add = [&](std::vector<CheckResult> checks) {
    for (auto& c : checks) report.checks.push_back(std::move(c));
  };
  const bool all = suite == "all";
  if (all || suite == "clenshaw-scalar") add(clenshaw_scalar_checks(seed));
  if (all || suite == "spectral") add(spectral_checks(seed, trials));
  if (all || suite == "theorem1") add(theorem1_checks(seed, trials));
  if (all || suite == "theorem2") add(theorem2_checks(seed, trials));
  if (all || suite == "gcnii-unfold") add(gcnii_unfold_checks(seed));
  if (all || suite == "gradients") add(gradient_checks(seed));
  if (all || suite == "models") add(model_checks(seed, trials));
  return report;
}

}  // namespace clenshaw::verify
