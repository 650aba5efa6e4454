#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "clenshaw/matrix.hpp"

namespace clenshaw {

/// Raised by the text readers; the message carries the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct Edge {
  std::int64_t u = 0;
  std::int64_t v = 0;
  double w = 1.0;
};

/// Square sparse matrix in compressed-row form. Column indices are strictly
/// increasing within a row.
struct SparseMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  std::vector<double> vals;

  std::size_t nnz() const noexcept { return cols.size(); }
  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {cols.data() + offsets[r], offsets[r + 1] - offsets[r]};
  }
  std::span<const double> row_vals(std::size_t r) const {
    return {vals.data() + offsets[r], offsets[r + 1] - offsets[r]};
  }
  /// Stored value at (r, c), or 0 when the entry is absent.
  double at(std::size_t r, std::size_t c) const;

  Matrix to_dense() const;
};

/// Undirected simple graph. The adjacency is symmetric, without stored
/// self-loops.
class Graph {
 public:
  Graph() = default;

  std::size_t num_nodes() const noexcept { return adj_.n; }
  /// Number of undirected edges (half the stored entries).
  std::size_t num_edges() const noexcept { return adj_.nnz() / 2; }
  std::size_t degree(std::size_t u) const { return adj_.offsets[u + 1] - adj_.offsets[u]; }
  /// Sum of incident edge weights.
  double weighted_degree(std::size_t u) const;
  std::span<const std::size_t> neighbors(std::size_t u) const { return adj_.row_cols(u); }
  std::span<const double> weights(std::size_t u) const { return adj_.row_vals(u); }
  const SparseMatrix& adjacency() const noexcept { return adj_; }

  /// Permuted copy: node u becomes node perm[u].
  Graph relabeled(std::span<const std::size_t> perm) const;

  friend Graph build_graph(std::span<const Edge> edges, std::int64_t n);

 private:
  explicit Graph(SparseMatrix adj) : adj_(std::move(adj)) {}
  SparseMatrix adj_;
};

/// Symmetrizes the edge list, drops self-loops and keeps the first weight
/// seen for each unordered pair. Throws std::invalid_argument for n <= 0 and
/// std::out_of_range for a node id outside [0, n).
Graph build_graph(std::span<const Edge> edges, std::int64_t n);

enum class OperatorKind { NormalizedAdjacency, Laplacian };

/// Either P = (D+I)^{-1/2}(A+I)(D+I)^{-1/2} or L = I - P.
struct PropagationOperator {
  SparseMatrix matrix;
  OperatorKind kind = OperatorKind::NormalizedAdjacency;

  std::size_t size() const noexcept { return matrix.n; }
};

PropagationOperator normalized_adjacency(const Graph& g);

/// I - P. Throws std::invalid_argument unless p is a normalized adjacency.
PropagationOperator laplacian(const PropagationOperator& p);

/// Sparse-dense product p * h. Each output row accumulates in ascending
/// column order, so results are bitwise reproducible.
SignalMatrix spmm(const PropagationOperator& p, const SignalMatrix& h);
void spmm_into(const SparseMatrix& p, const SignalMatrix& h, SignalMatrix& out);

/// Reads "u v" or "u v w" lines; '#' starts a comment line.
std::vector<Edge> read_edge_list(const std::filesystem::path& path);
std::vector<Edge> parse_edge_list(const std::string& text, const std::string& source = "<edges>");

}  // namespace clenshaw
