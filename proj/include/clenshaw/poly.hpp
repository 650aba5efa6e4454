#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clenshaw/matrix.hpp"

namespace clenshaw {

enum class Basis { Monomial, ChebyshevU, ChebyshevT };

std::string_view to_string(Basis b);
/// Accepts "monomial", "chebyshev-u" and "chebyshev-t" (case-sensitive).
Basis parse_basis(std::string_view s);

/// Polynomial coefficients where index k multiplies the degree-k basis
/// function. Always non-empty with finite entries.
class CoeffVector {
 public:
  CoeffVector(std::vector<double> coeffs, Basis basis);

  Basis basis() const noexcept { return basis_; }
  std::size_t size() const noexcept { return coeffs_.size(); }
  std::size_t degree() const noexcept { return coeffs_.size() - 1; }
  std::span<const double> coeffs() const noexcept { return coeffs_; }
  double operator[](std::size_t k) const { return coeffs_[k]; }

  bool operator==(const CoeffVector&) const = default;

 private:
  std::vector<double> coeffs_;
  Basis basis_;
};

/// Chebyshev polynomial of the second kind, U_{-1} = 0, U_0 = 1, U_1 = 2x.
double cheb_u(int k, double x);
/// Chebyshev polynomial of the first kind, T_0 = 1, T_1 = x.
double cheb_t(int k, double x);

/// Backward Horner recursion for a monomial-basis polynomial.
double horner_eval(const CoeffVector& c, double x);

/// Clenshaw backward recurrence b_k = a_k + 2x b_{k+1} - b_{k+2} with
/// b_{n+1} = b_{n+2} = 0. Returns b_0 = sum a_k U_k(x).
double clenshaw_sum_u(const CoeffVector& c, double x);

/// Term-by-term sum a_k U_k(x). Slow path, used as the reference for
/// clenshaw_sum_u.
double direct_sum_u(const CoeffVector& c, double x);

/// Full b sequence from the Clenshaw recurrence, indexed from -1:
/// result[0] = b_{-1}, result[k+1] = b_k. b_{-1} continues the recurrence
/// with a_{-1} = 0.
std::vector<double> clenshaw_b_sequence(const CoeffVector& c, double x);

/// Banded (n+2)x(n+2) matrix with 1 on the diagonal, -2x on the first and 1
/// on the second subdiagonal. Rows/cols index U_{-1}..U_n, so A u = e_0 for
/// u = (U_{-1}(x), ..., U_n(x)), and the Clenshaw b vector solves b^T A =
/// (0, a_0, ..., a_n).
Matrix clenshaw_elimination_matrix(std::size_t degree, double x);

/// Evaluates in whatever basis c declares.
double evaluate(const CoeffVector& c, double x);

/// Exact change of basis from U_k to powers of x, built by running the
/// three-term recurrence on coefficient vectors.
CoeffVector u_basis_to_monomial(const CoeffVector& c);

/// Product of two monomial-basis polynomials.
CoeffVector monomial_product(const CoeffVector& a, const CoeffVector& b);

}  // namespace clenshaw
