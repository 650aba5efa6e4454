#include "clenshaw/linear_filters.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace clenshaw {

LinearPropagationTrace::LinearPropagationTrace(std::vector<SignalMatrix> states,
                                               std::vector<double> alphas)
    : states_(std::move(states)), alphas_(std::move(alphas)) {
  if (states_.size() != alphas_.size() + 2) {
    throw std::invalid_argument("LinearPropagationTrace: expected K+3 states");
  }
}

const SignalMatrix& LinearPropagationTrace::state(int layer) const {
  if (layer < -2 || layer > order()) {
    throw std::out_of_range("LinearPropagationTrace: layer " + std::to_string(layer) +
                            " outside [-2," + std::to_string(order()) + "]");
  }
  return states_[static_cast<std::size_t>(layer + 2)];
}

namespace {

void check_inputs(const PropagationOperator& p, const SignalMatrix& h_star,
                  std::size_t num_alphas, int K, const char* who) {
  if (p.kind != OperatorKind::NormalizedAdjacency) {
    throw std::invalid_argument(std::string(who) + ": expects the normalized adjacency");
  }
  if (K < 0) throw std::invalid_argument(std::string(who) + ": K must be non-negative");
  if (num_alphas != static_cast<std::size_t>(K) + 1) {
    throw std::invalid_argument(std::string(who) + ": need K+1 = " + std::to_string(K + 1) +
                                " coefficients, got " + std::to_string(num_alphas));
  }
  if (h_star.rows() != p.size()) {
    throw DimensionError(std::string(who) + ": H* has " + std::to_string(h_star.rows()) +
                         " rows, operator is " + std::to_string(p.size()));
  }
}

void check_alpha(double alpha, const char* who) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument(std::string(who) + ": alpha must lie in [0, 1]");
  }
}

// states[l+2] = first * P H^(l-1) + second * H^(l-1) - back2 * H^(l-2) + alpha_l H*
LinearPropagationTrace run_recurrence(const PropagationOperator& p, const SignalMatrix& h_star,
                                      const std::vector<double>& alphas, double first,
                                      double second, double back2) {
  std::vector<SignalMatrix> states;
  states.reserve(alphas.size() + 2);
  states.emplace_back(h_star.rows(), h_star.cols());
  states.emplace_back(h_star.rows(), h_star.cols());
  SignalMatrix ph;
  for (std::size_t l = 0; l < alphas.size(); ++l) {
    const SignalMatrix& prev1 = states[l + 1];
    const SignalMatrix& prev2 = states[l];
    spmm_into(p.matrix, prev1, ph);
    SignalMatrix next(h_star.rows(), h_star.cols());
    auto out = next.values();
    auto pv = ph.values();
    auto h1 = prev1.values();
    auto h2 = prev2.values();
    auto hs = h_star.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = first * pv[i] + second * h1[i] - back2 * h2[i] + alphas[l] * hs[i];
    }
    states.push_back(std::move(next));
  }
  return LinearPropagationTrace(std::move(states), alphas);
}

}  // namespace

LinearPropagationTrace horner_propagate_linear(const PropagationOperator& p,
                                               const SignalMatrix& h_star,
                                               const std::vector<double>& alphas, int K) {
  check_inputs(p, h_star, alphas.size(), K, "horner_propagate_linear");
  return run_recurrence(p, h_star, alphas, 1.0, 0.0, 0.0);
}

LinearPropagationTrace clenshaw_propagate_linear(const PropagationOperator& p,
                                                 const SignalMatrix& h_star,
                                                 const std::vector<double>& alphas, int K) {
  check_inputs(p, h_star, alphas.size(), K, "clenshaw_propagate_linear");
  return run_recurrence(p, h_star, alphas, 2.0, 0.0, 1.0);
}

LinearPropagationTrace delta_residue_propagate_linear(const PropagationOperator& p,
                                                      const SignalMatrix& h_star,
                                                      const std::vector<double>& alphas, int K) {
  check_inputs(p, h_star, alphas.size(), K, "delta_residue_propagate_linear");
  return run_recurrence(p, h_star, alphas, 2.0, -1.0, 0.0);
}

SignalMatrix gcnii_propagate_linear(const PropagationOperator& p, const SignalMatrix& h_star,
                                    double alpha, int K) {
  check_alpha(alpha, "gcnii_propagate_linear");
  check_inputs(p, h_star, static_cast<std::size_t>(K < 0 ? 0 : K) + 1, K,
               "gcnii_propagate_linear");
  SignalMatrix h = h_star;
  SignalMatrix ph;
  for (int l = 1; l <= K; ++l) {
    spmm_into(p.matrix, h, ph);
    auto out = h.values();
    auto pv = ph.values();
    auto hs = h_star.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - alpha) * pv[i] + alpha * hs[i];
  }
  return h;
}

CoeffVector fixed_param_coefficients(double alpha, int K) {
  check_alpha(alpha, "fixed_param_coefficients");
  if (K < 0) throw std::invalid_argument("fixed_param_coefficients: K must be non-negative");
  std::vector<double> c(static_cast<std::size_t>(K) + 1);
  c[0] = std::pow(1.0 - alpha, K);
  for (int l = 1; l <= K; ++l) c[static_cast<std::size_t>(l)] = alpha * std::pow(1.0 - alpha, K - l);
  return CoeffVector(std::move(c), Basis::ChebyshevU);
}

CoeffVector gcnii_unfolded_coefficients(double alpha, int K) {
  check_alpha(alpha, "gcnii_unfolded_coefficients");
  if (K < 0) throw std::invalid_argument("gcnii_unfolded_coefficients: K must be non-negative");
  std::vector<double> c(static_cast<std::size_t>(K) + 1);
  for (int l = 0; l < K; ++l) c[static_cast<std::size_t>(l)] = alpha * std::pow(1.0 - alpha, l);
  c[static_cast<std::size_t>(K)] = std::pow(1.0 - alpha, K);
  return CoeffVector(std::move(c), Basis::Monomial);
}

CoeffVector layer_to_basis(const std::vector<double>& alphas, Basis basis) {
  return CoeffVector(std::vector<double>(alphas.rbegin(), alphas.rend()), basis);
}

}  // namespace clenshaw
