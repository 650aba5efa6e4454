#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "clenshaw/graph.hpp"
#include "clenshaw/matrix.hpp"
#include "clenshaw/poly.hpp"

namespace clenshaw {

inline constexpr std::size_t kDefaultDenseLimit = 2048;

/// m = U diag(mu) U^T with orthonormal eigenvector columns and mu ascending.
struct EigenDecomposition {
  Matrix vectors;
  std::vector<double> mu;

  std::size_t size() const noexcept { return mu.size(); }
  /// Laplacian spectrum 1 - mu, in the same order as mu.
  std::vector<double> lambda() const;
  /// U diag(mu) U^T.
  Matrix reconstruct() const;
};

struct JacobiOptions {
  std::size_t dense_limit = kDefaultDenseLimit;
  std::size_t max_sweeps = 100;
  double relative_tolerance = 1e-12;
};

/// Cyclic Jacobi eigensolver. Throws std::invalid_argument for a
/// non-square or asymmetric input (tolerance 1e-10) and std::length_error
/// when the matrix exceeds the dense limit.
EigenDecomposition eig_sym(const Matrix& m, const JacobiOptions& opts = {});

/// Exact spectral filter U diag(h(mu_i)) U^T x where h is the polynomial c
/// in the monomial or second-kind Chebyshev basis.
SignalMatrix apply_filter_exact(const EigenDecomposition& d, const CoeffVector& c,
                                const SignalMatrix& x);

/// Filter with an arbitrary per-eigenvalue response (one value per mu_i).
SignalMatrix apply_spectral_response(const EigenDecomposition& d,
                                     const std::vector<double>& response, const SignalMatrix& x);

/// Pointwise (mu, h(mu)) pairs in the basis declared by c.
std::vector<std::pair<double, double>> filter_response(const CoeffVector& c,
                                                       const std::vector<double>& grid);

/// n evenly spaced points from -1 to 1 inclusive (n = 1 yields {1}).
std::vector<double> uniform_grid(std::size_t n);

}  // namespace clenshaw
