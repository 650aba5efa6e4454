#pragma once

#include <cstddef>
#include <vector>

#include "clenshaw/graph.hpp"
#include "clenshaw/matrix.hpp"
#include "clenshaw/poly.hpp"

namespace clenshaw {

/// States H^(-2), H^(-1), H^(0), ..., H^(K) of a linearized propagation,
/// together with the per-layer residue coefficients alpha_0..alpha_K.
class LinearPropagationTrace {
 public:
  LinearPropagationTrace(std::vector<SignalMatrix> states, std::vector<double> alphas);

  int order() const noexcept { return static_cast<int>(alphas_.size()) - 1; }
  /// H^(layer) for layer in [-2, K].
  const SignalMatrix& state(int layer) const;
  const SignalMatrix& final_state() const { return states_.back(); }
  const std::vector<double>& alphas() const noexcept { return alphas_; }
  std::size_t length() const noexcept { return states_.size(); }

 private:
  std::vector<SignalMatrix> states_;
  std::vector<double> alphas_;
};

/// H^(l) = P H^(l-1) + alpha_l H*, H^(-1) = 0. alphas are in layer order.
LinearPropagationTrace horner_propagate_linear(const PropagationOperator& p,
                                               const SignalMatrix& h_star,
                                               const std::vector<double>& alphas, int K);

/// H^(l) = 2 P H^(l-1) - H^(l-2) + alpha_l H*, H^(-2) = H^(-1) = 0.
LinearPropagationTrace clenshaw_propagate_linear(const PropagationOperator& p,
                                                 const SignalMatrix& h_star,
                                                 const std::vector<double>& alphas, int K);

/// H^(l) = (1 - alpha) P H^(l-1) + alpha H* for l = 1..K, starting at H^(0) = H*.
SignalMatrix gcnii_propagate_linear(const PropagationOperator& p, const SignalMatrix& h_star,
                                    double alpha, int K);

/// H^(l) = (2P - I) H^(l-1) + alpha_l H*, the single-back-state difference
/// residue. Unfolds to sum alpha_{K-l} (2P - I)^l H*.
LinearPropagationTrace delta_residue_propagate_linear(const PropagationOperator& p,
                                                      const SignalMatrix& h_star,
                                                      const std::vector<double>& alphas, int K);

/// Layer-order residues alpha(1-alpha)^(K-l) for l >= 1 and (1-alpha)^K for
/// l = 0. Entries sum to one. Tagged chebyshev-u since they drive the
/// Clenshaw recurrence.
CoeffVector fixed_param_coefficients(double alpha, int K);

/// Monomial coefficients of the unfolded GCNII filter: alpha(1-alpha)^l
/// for l < K and (1-alpha)^K at l = K.
CoeffVector gcnii_unfolded_coefficients(double alpha, int K);

/// Reverses layer-order residues into basis order: c_l = alpha_{K-l}.
CoeffVector layer_to_basis(const std::vector<double>& alphas, Basis basis);

}  // namespace clenshaw
