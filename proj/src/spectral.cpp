#include "clenshaw/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace clenshaw {

std::vector<double> EigenDecomposition::lambda() const {
  std::vector<double> out(mu.size());
  std::transform(mu.begin(), mu.end(), out.begin(), [](double m) { return 1.0 - m; });
  return out;
}

Matrix EigenDecomposition::reconstruct() const {
  const std::size_t n = size();
  Matrix scaled = vectors;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) scaled(i, j) *= mu[j];
  return matmul(scaled, transpose(vectors));
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

EigenDecomposition eig_sym(const Matrix& m, const JacobiOptions& opts) {
  const std::size_t n = m.rows();
  if (m.cols() != n) throw std::invalid_argument("eig_sym: matrix is not square");
  if (n > opts.dense_limit) {
    throw std::length_error("eig_sym: " + std::to_string(n) + " nodes exceeds dense limit " +
                            std::to_string(opts.dense_limit));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-10) {
        throw std::invalid_argument("eig_sym: matrix is not symmetric at (" + std::to_string(i) +
                                    "," + std::to_string(j) + ")");
      }

  Matrix a = m;
  Matrix v = Matrix::identity(n);
  const double threshold = opts.relative_tolerance * frobenius_norm(m);

  for (std::size_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    if (off_diagonal_norm(a) <= threshold) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Rotation angle zeroing a(p,q); t is the smaller root of
        // t^2 + 2 theta t - 1 = 0.
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  EigenDecomposition d;
  d.mu.resize(n);
  d.vectors = Matrix(n, n);
  for (std::size_t col = 0; col < n; ++col) {
    d.mu[col] = a(order[col], order[col]);
    for (std::size_t r = 0; r < n; ++r) d.vectors(r, col) = v(r, order[col]);
  }
  return d;
}

SignalMatrix apply_spectral_response(const EigenDecomposition& d,
                                     const std::vector<double>& response, const SignalMatrix& x) {
  const std::size_t n = d.size();
  if (x.rows() != n) {
    throw DimensionError("apply_filter_exact: signal has " + std::to_string(x.rows()) +
                         " rows, decomposition has " + std::to_string(n));
  }
  if (response.size() != n) throw DimensionError("apply_spectral_response: response length");
  // coeffs = diag(h) U^T x
  Matrix coeffs(n, x.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = coeffs.row(i);
    for (std::size_t r = 0; r < n; ++r) {
      const double u = d.vectors(r, i);
      auto src = x.row(r);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += u * src[j];
    }
    for (double& c : dst) c *= response[i];
  }
  return matmul(d.vectors, coeffs);
}

SignalMatrix apply_filter_exact(const EigenDecomposition& d, const CoeffVector& c,
                                const SignalMatrix& x) {
  std::vector<double> h(d.size());
  switch (c.basis()) {
    case Basis::Monomial:
      for (std::size_t i = 0; i < h.size(); ++i) h[i] = horner_eval(c, d.mu[i]);
      break;
    case Basis::ChebyshevU:
      for (std::size_t i = 0; i < h.size(); ++i) h[i] = clenshaw_sum_u(c, d.mu[i]);
      break;
    default:
      throw std::invalid_argument("apply_filter_exact: basis must be monomial or chebyshev-u");
  }
  return apply_spectral_response(d, h, x);
}

std::vector<std::pair<double, double>> filter_response(const CoeffVector& c,
                                                       const std::vector<double>& grid) {
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (double mu : grid) out.emplace_back(mu, evaluate(c, mu));
  return out;
}

std::vector<double> uniform_grid(std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {1.0};
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return g;
}

}  // namespace clenshaw
