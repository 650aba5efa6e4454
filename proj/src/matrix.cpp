#include "clenshaw/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace clenshaw {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()));
  }
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + " differ");
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
  const double* __restrict pa = a.values().data();
  const double* __restrict pb = b.values().data();
  double* __restrict pc = out.values().data();
  // 4x4 register tiles (16 accumulators fit the SSE2 register file). Every
  // entry still sums over k in ascending order.
  constexpr std::size_t R = 4;
  constexpr std::size_t C = 4;
  std::size_t i = 0;
  for (; i + R <= n; i += R) {
    std::size_t j = 0;
    for (; j + C <= m; j += C) {
      double acc[R][C] = {};
      for (std::size_t k = 0; k < inner; ++k) {
        const double* brow = pb + k * m + j;
        for (std::size_t r = 0; r < R; ++r) {
          const double av = pa[(i + r) * inner + k];
          for (std::size_t q = 0; q < C; ++q) acc[r][q] += av * brow[q];
        }
      }
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t q = 0; q < C; ++q) pc[(i + r) * m + j + q] = acc[r][q];
    }
    for (; j < m; ++j) {
      for (std::size_t r = 0; r < R; ++r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < inner; ++k) acc += pa[(i + r) * inner + k] * pb[k * m + j];
        pc[(i + r) * m + j] = acc;
      }
    }
  }
  for (; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < inner; ++k) acc += pa[i * inner + k] * pb[k * m + j];
      pc[i * m + j] = acc;
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
  return m;
}

double relative_frobenius_error(const Matrix& a, const Matrix& reference) {
  require_same_shape(a, reference, "relative_frobenius_error");
  const double diff = frobenius_norm(a - reference);
  const double ref = frobenius_norm(reference);
  return ref > 0.0 ? diff / ref : diff;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.values().begin(), a.values().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace clenshaw
