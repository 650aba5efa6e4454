#include "clenshaw/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace clenshaw {

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto cs = row_cols(r);
  auto it = std::lower_bound(cs.begin(), cs.end(), c);
  if (it == cs.end() || *it != c) return 0.0;
  return row_vals(r)[static_cast<std::size_t>(it - cs.begin())];
}

Matrix SparseMatrix::to_dense() const {
  Matrix d(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    auto cs = row_cols(r);
    auto vs = row_vals(r);
    for (std::size_t k = 0; k < cs.size(); ++k) d(r, cs[k]) = vs[k];
  }
  return d;
}

double Graph::weighted_degree(std::size_t u) const {
  double d = 0.0;
  for (double w : weights(u)) d += w;
  return d;
}

Graph build_graph(std::span<const Edge> edges, std::int64_t n) {
  if (n <= 0) throw std::invalid_argument("build_graph: node count must be positive");

  // First weight wins per unordered pair; ordering by input position makes
  // the choice independent of which direction the pair was listed in.
  std::map<std::pair<std::size_t, std::size_t>, double> pairs;
  for (const Edge& e : edges) {
    if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n) {
      throw std::out_of_range("build_graph: edge (" + std::to_string(e.u) + "," +
                              std::to_string(e.v) + ") outside [0," + std::to_string(n) + ")");
    }
    if (e.u == e.v) continue;
    auto a = static_cast<std::size_t>(std::min(e.u, e.v));
    auto b = static_cast<std::size_t>(std::max(e.u, e.v));
    pairs.try_emplace({a, b}, e.w);
  }

  const auto nn = static_cast<std::size_t>(n);
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(nn);
  for (const auto& [key, w] : pairs) {
    rows[key.first].emplace_back(key.second, w);
    rows[key.second].emplace_back(key.first, w);
  }

  SparseMatrix adj;
  adj.n = nn;
  adj.offsets.assign(nn + 1, 0);
  adj.cols.reserve(pairs.size() * 2);
  adj.vals.reserve(pairs.size() * 2);
  for (std::size_t r = 0; r < nn; ++r) {
    auto& row = rows[r];
    std::sort(row.begin(), row.end());
    for (const auto& [c, w] : row) {
      adj.cols.push_back(c);
      adj.vals.push_back(w);
    }
    adj.offsets[r + 1] = adj.cols.size();
  }
  return Graph(std::move(adj));
}

Graph Graph::relabeled(std::span<const std::size_t> perm) const {
  if (perm.size() != num_nodes()) throw DimensionError("relabeled: permutation length");
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < num_nodes(); ++u) {
    auto cs = neighbors(u);
    auto ws = weights(u);
    for (std::size_t k = 0; k < cs.size(); ++k) {
      if (cs[k] > u) {
        edges.push_back({static_cast<std::int64_t>(perm[u]),
                         static_cast<std::int64_t>(perm[cs[k]]), ws[k]});
      }
    }
  }
  return build_graph(edges, static_cast<std::int64_t>(num_nodes()));
}

PropagationOperator normalized_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt(n);
  for (std::size_t u = 0; u < n; ++u) inv_sqrt[u] = 1.0 / std::sqrt(g.weighted_degree(u) + 1.0);

  SparseMatrix m;
  m.n = n;
  m.offsets.assign(n + 1, 0);
  m.cols.reserve(g.adjacency().nnz() + n);
  m.vals.reserve(g.adjacency().nnz() + n);
  for (std::size_t u = 0; u < n; ++u) {
    auto cs = g.neighbors(u);
    auto ws = g.weights(u);
    bool diag_done = false;
    for (std::size_t k = 0; k <= cs.size(); ++k) {
      if (!diag_done && (k == cs.size() || cs[k] > u)) {
        m.cols.push_back(u);
        m.vals.push_back(inv_sqrt[u] * inv_sqrt[u]);
        diag_done = true;
      }
      if (k == cs.size()) break;
      m.cols.push_back(cs[k]);
      m.vals.push_back(ws[k] * inv_sqrt[u] * inv_sqrt[cs[k]]);
    }
    m.offsets[u + 1] = m.cols.size();
  }
  return {std::move(m), OperatorKind::NormalizedAdjacency};
}

PropagationOperator laplacian(const PropagationOperator& p) {
  if (p.kind != OperatorKind::NormalizedAdjacency) {
    throw std::invalid_argument("laplacian: input must be a normalized adjacency operator");
  }
  // P always stores its full diagonal, so the pattern carries over unchanged.
  SparseMatrix m = p.matrix;
  for (std::size_t r = 0; r < m.n; ++r) {
    for (std::size_t k = m.offsets[r]; k < m.offsets[r + 1]; ++k) {
      m.vals[k] = (m.cols[k] == r ? 1.0 : 0.0) - m.vals[k];
    }
  }
  return {std::move(m), OperatorKind::Laplacian};
}

void spmm_into(const SparseMatrix& p, const SignalMatrix& h, SignalMatrix& out) {
  if (h.rows() != p.n) {
    throw DimensionError("spmm: operator is " + std::to_string(p.n) + "x" + std::to_string(p.n) +
                         " but signal has " + std::to_string(h.rows()) + " rows");
  }
  if (out.rows() != p.n || out.cols() != h.cols()) out = SignalMatrix(p.n, h.cols());
  const std::size_t m = h.cols();
  const double* __restrict src = h.values().data();
  double* __restrict dst = out.values().data();
  constexpr std::size_t C = 8;
  for (std::size_t r = 0; r < p.n; ++r) {
    auto cs = p.row_cols(r);
    auto vs = p.row_vals(r);
    double* row = dst + r * m;
    // Column tiles kept in registers; neighbours are visited in ascending order.
    std::size_t j = 0;
    for (; j + C <= m; j += C) {
      double acc[C] = {};
      for (std::size_t k = 0; k < cs.size(); ++k) {
        const double* s = src + cs[k] * m + j;
        const double w = vs[k];
        for (std::size_t q = 0; q < C; ++q) acc[q] += w * s[q];
      }
      for (std::size_t q = 0; q < C; ++q) row[j + q] = acc[q];
    }
    for (; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < cs.size(); ++k) acc += vs[k] * src[cs[k] * m + j];
      row[j] = acc;
    }
  }
}

SignalMatrix spmm(const PropagationOperator& p, const SignalMatrix& h) {
  SignalMatrix out;
  spmm_into(p.matrix, h, out);
  return out;
}

namespace {

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

}  // namespace

std::vector<Edge> parse_edge_list(const std::string& text, const std::string& source) {
  std::vector<Edge> edges;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty() || toks.front().starts_with('#')) continue;
    if (toks.size() != 2 && toks.size() != 3) {
      throw ParseError(source, lineno, "expected 'u v' or 'u v w', got " +
                                           std::to_string(toks.size()) + " fields");
    }
    Edge e;
    if (!parse_number(toks[0], e.u) || !parse_number(toks[1], e.v)) {
      throw ParseError(source, lineno, "node ids must be integers");
    }
    if (toks.size() == 3 && (!parse_number(toks[2], e.w) || !std::isfinite(e.w))) {
      throw ParseError(source, lineno, "edge weight is not a finite number");
    }
    edges.push_back(e);
  }
  return edges;
}

std::vector<Edge> read_edge_list(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open edge file " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_edge_list(buf.str(), path.string());
}

}  // namespace clenshaw
