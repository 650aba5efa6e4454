#include "clenshaw/poly.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace clenshaw {

std::string_view to_string(Basis b) {
  switch (b) {
    case Basis::Monomial: return "monomial";
    case Basis::ChebyshevU: return "chebyshev-u";
    case Basis::ChebyshevT: return "chebyshev-t";
  }
  return "unknown";
}

Basis parse_basis(std::string_view s) {
  if (s == "monomial") return Basis::Monomial;
  if (s == "chebyshev-u") return Basis::ChebyshevU;
  if (s == "chebyshev-t") return Basis::ChebyshevT;
  throw std::invalid_argument("unknown basis '" + std::string(s) + "'");
}

CoeffVector::CoeffVector(std::vector<double> coeffs, Basis basis)
    : coeffs_(std::move(coeffs)), basis_(basis) {
  if (coeffs_.empty()) throw std::invalid_argument("CoeffVector: needs at least one coefficient");
  for (double v : coeffs_) {
    if (!std::isfinite(v)) throw std::invalid_argument("CoeffVector: non-finite coefficient");
  }
}

namespace {

void require_basis(const CoeffVector& c, Basis expected, const char* who) {
  if (c.basis() != expected) {
    throw std::invalid_argument(std::string(who) + ": expected " +
                                std::string(to_string(expected)) + " coefficients, got " +
                                std::string(to_string(c.basis())));
  }
}

}  // namespace

double cheb_u(int k, double x) {
  if (k < 0) return 0.0;
  double prev = 0.0;  // U_{-1}
  double cur = 1.0;   // U_0
  for (int i = 1; i <= k; ++i) {
    const double next = 2.0 * x * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double cheb_t(int k, double x) {
  if (k <= 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int i = 2; i <= k; ++i) {
    const double next = 2.0 * x * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double horner_eval(const CoeffVector& c, double x) {
  require_basis(c, Basis::Monomial, "horner_eval");
  auto a = c.coeffs();
  double b = a.back();
  for (std::size_t i = a.size() - 1; i-- > 0;) b = a[i] + b * x;
  return b;
}

double clenshaw_sum_u(const CoeffVector& c, double x) {
  require_basis(c, Basis::ChebyshevU, "clenshaw_sum_u");
  auto a = c.coeffs();
  double b2 = 0.0;  // b_{k+2}
  double b1 = 0.0;  // b_{k+1}
  for (std::size_t k = a.size(); k-- > 0;) {
    const double b = a[k] + 2.0 * x * b1 - b2;
    b2 = b1;
    b1 = b;
  }
  return b1;
}

double direct_sum_u(const CoeffVector& c, double x) {
  require_basis(c, Basis::ChebyshevU, "direct_sum_u");
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * cheb_u(static_cast<int>(k), x);
  return s;
}

std::vector<double> clenshaw_b_sequence(const CoeffVector& c, double x) {
  require_basis(c, Basis::ChebyshevU, "clenshaw_b_sequence");
  const std::size_t n = c.size();
  std::vector<double> b(n + 1, 0.0);
  double b2 = 0.0;
  double b1 = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    b[k + 1] = c[k] + 2.0 * x * b1 - b2;
    b2 = b1;
    b1 = b[k + 1];
  }
  b[0] = 2.0 * x * b1 - b2;
  return b;
}

Matrix clenshaw_elimination_matrix(std::size_t degree, double x) {
  const std::size_t m = degree + 2;
  Matrix a(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    a(i, i) = 1.0;
    if (i >= 1) a(i, i - 1) = -2.0 * x;
    if (i >= 2) a(i, i - 2) = 1.0;
  }
  return a;
}

double evaluate(const CoeffVector& c, double x) {
  switch (c.basis()) {
    case Basis::Monomial: return horner_eval(c, x);
    case Basis::ChebyshevU: return clenshaw_sum_u(c, x);
    case Basis::ChebyshevT: {
      double s = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * cheb_t(static_cast<int>(k), x);
      return s;
    }
  }
  throw std::invalid_argument("evaluate: unknown basis");
}

CoeffVector u_basis_to_monomial(const CoeffVector& c) {
  require_basis(c, Basis::ChebyshevU, "u_basis_to_monomial");
  const std::size_t n = c.size();
  std::vector<double> out(n, 0.0);
  // Monomial coefficients of U_{k-1} and U_k, advanced with U_{k+1} = 2x U_k - U_{k-1}.
  std::vector<double> prev(n, 0.0);
  std::vector<double> cur(n, 0.0);
  cur[0] = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i <= k; ++i) out[i] += c[k] * cur[i];
    if (k + 1 == n) break;
    std::vector<double> next(n, 0.0);
    for (std::size_t i = 0; i <= k; ++i) next[i + 1] += 2.0 * cur[i];
    for (std::size_t i = 0; i < n; ++i) next[i] -= prev[i];
    prev = std::move(cur);
    cur = std::move(next);
  }
  return CoeffVector(std::move(out), Basis::Monomial);
}

CoeffVector monomial_product(const CoeffVector& a, const CoeffVector& b) {
  require_basis(a, Basis::Monomial, "monomial_product");
  require_basis(b, Basis::Monomial, "monomial_product");
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return CoeffVector(std::move(out), Basis::Monomial);
}

}  // namespace clenshaw
