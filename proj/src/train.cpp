#include "clenshaw/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "clenshaw/autograd.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace clenshaw {

std::size_t Dataset::num_classes() const {
  if (labels.empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
}

void Dataset::validate() const {
  const std::size_t n = labels.size();
  if (features.rows() != n) {
    throw std::invalid_argument("dataset: " + std::to_string(features.rows()) +
                                " feature rows but " + std::to_string(n) + " labels");
  }
  if (graph.num_nodes() != n) {
    throw std::invalid_argument("dataset: graph has " + std::to_string(graph.num_nodes()) +
                                " nodes but " + std::to_string(n) + " labels");
  }
  for (int y : labels)
    if (y < 0) throw std::invalid_argument("dataset: negative label");
  if (num_classes() < 2) throw std::invalid_argument("dataset: need at least two classes");
}

namespace {

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(std::string("cannot open ") + what + " file " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

SignalMatrix parse_feature_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (start <= body.size()) {
      const auto comma = body.find(',', start);
      const auto tok = trim(body.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                : comma - start));
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        throw ParseError(source, lineno, "bad feature value '" + std::string(tok) + "'");
      }
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw ParseError(source, lineno, "expected " + std::to_string(cols) + " columns, got " +
                                           std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(source, lineno, "no feature rows");
  return SignalMatrix(rows, cols, std::move(values));
}

std::vector<int> parse_labels(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    int y = 0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), y);
    if (ec != std::errc() || ptr != body.data() + body.size() || y < 0) {
      throw ParseError(source, lineno, "label must be a non-negative integer");
    }
    labels.push_back(y);
  }
  return labels;
}

Dataset load_dataset(const std::filesystem::path& edge_file,
                     const std::filesystem::path& feature_file,
                     const std::filesystem::path& label_file, const LoadOptions& opts) {
  Dataset d;
  d.features = parse_feature_csv(read_file(feature_file, "feature"), feature_file.string());
  d.labels = parse_labels(read_file(label_file, "label"), label_file.string());
  if (d.labels.size() != d.features.rows()) {
    throw std::invalid_argument("dataset: " + feature_file.string() + " has " +
                                std::to_string(d.features.rows()) + " rows but " +
                                label_file.string() + " has " + std::to_string(d.labels.size()) +
                                " labels");
  }
  const auto edges = read_edge_list(edge_file);
  d.graph = build_graph(edges, static_cast<std::int64_t>(d.labels.size()));
  if (opts.row_normalize) {
    for (std::size_t r = 0; r < d.features.rows(); ++r) {
      auto row = d.features.row(r);
      double s = 0.0;
      for (double v : row) s += std::abs(v);
      if (s > 0.0)
        for (double& v : row) v /= s;
    }
  }
  d.validate();
  return d;
}

Split random_split(std::size_t n, double p_train, double p_val, double p_test,
                   std::uint64_t seed) {
  for (double p : {p_train, p_val, p_test}) {
    if (!(p >= 0.0)) throw std::invalid_argument("random_split: proportions must be >= 0");
  }
  if (p_train + p_val + p_test > 1.0 + 1e-12) {
    throw std::invalid_argument("random_split: proportions sum above 1");
  }
  auto part = [n](double p) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * p + 1e-9));
  };
  const std::size_t n_train = part(p_train);
  const std::size_t n_val = part(p_val);
  const std::size_t n_test = part(p_test);
  if ((p_train > 0 && n_train == 0) || (p_val > 0 && n_val == 0) || (p_test > 0 && n_test == 0)) {
    throw std::invalid_argument("random_split: " + std::to_string(n) +
                                " nodes are too few for non-empty parts");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit bounded draw keeps the permutation
  // identical across standard library implementations.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  Split s;
  s.seed = seed;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val + n_test));
  return s;
}

Dataset generate_sbm(const SbmSpec& spec) {
  if (spec.blocks < 2 || spec.n_per_block < 1 || spec.feature_dim < 1) {
    throw std::invalid_argument("generate_sbm: need >= 2 blocks, >= 1 node per block, >= 1 feature");
  }
  for (double p : {spec.p_in, spec.p_out}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("generate_sbm: probability outside [0,1]");
  }
  if (!(spec.noise >= 0.0)) throw std::invalid_argument("generate_sbm: noise must be >= 0");

  const std::size_t n = spec.n_per_block * spec.blocks;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Dataset d;
  d.labels.resize(n);
  for (std::size_t u = 0; u < n; ++u) d.labels[u] = static_cast<int>(u / spec.n_per_block);

  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const double p = d.labels[u] == d.labels[v] ? spec.p_in : spec.p_out;
      if (unif(rng) < p) edges.push_back({static_cast<std::int64_t>(u), static_cast<std::int64_t>(v), 1.0});
    }
  }
  d.graph = build_graph(edges, static_cast<std::int64_t>(n));

  // Class means are random sign patterns of norm 1.
  const double mean_entry = 1.0 / std::sqrt(static_cast<double>(spec.feature_dim));
  Matrix means(spec.blocks, spec.feature_dim);
  for (double& m : means.values()) m = unif(rng) < 0.5 ? -mean_entry : mean_entry;
  std::normal_distribution<double> gauss(0.0, 1.0);
  d.features = SignalMatrix(n, spec.feature_dim);
  for (std::size_t u = 0; u < n; ++u) {
    const auto c = static_cast<std::size_t>(d.labels[u]);
    for (std::size_t j = 0; j < spec.feature_dim; ++j) {
      d.features(u, j) = means(c, j) + spec.noise * gauss(rng);
    }
  }
  for (std::size_t c = 0; c < spec.blocks; ++c) d.class_names.push_back("block" + std::to_string(c));
  return d;
}

double homophily(const Graph& g, std::span<const int> labels) {
  if (labels.size() != g.num_nodes()) throw DimensionError("homophily: one label per node required");
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    auto nb = g.neighbors(u);
    if (nb.empty()) continue;
    std::size_t same = 0;
    for (std::size_t v : nb)
      if (labels[v] == labels[u]) ++same;
    total += static_cast<double>(same) / static_cast<double>(nb.size());
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("homophily: every node is isolated");
  return total / static_cast<double>(counted);
}

double evaluate(const Matrix& logits, std::span<const int> labels,
                std::span<const std::size_t> mask) {
  if (mask.empty()) throw std::invalid_argument("evaluate: empty mask");
  if (labels.size() != logits.rows()) throw DimensionError("evaluate: one label per row required");
  const auto pred = predict(logits);
  std::size_t correct = 0;
  for (std::size_t r : mask)
    if (pred.at(r) == labels[r]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

TrainResult train(const Dataset& data, const Split& split, const ModelConfig& config) {
  data.validate();
  config.validate();
  if (split.train.empty()) throw std::invalid_argument("train: empty training split");

  const PropagationOperator p = normalized_adjacency(data.graph);
  ModelParams params = init_params(config, data.features.cols(), data.num_classes());

  ad::SgdMomentum alpha_opt(params.alpha_group(), config.lr_alpha, config.momentum);
  ad::Adam weight_opt(params.weight_group(), config.lr_weights, config.wd);

  TrainResult result;
  result.config = config;
  result.best_val_acc = -1.0;
  int bad_epochs = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (ad::Parameter* prm : params.all()) prm->zero_grad();
    {
      ad::Tape tape;
      ForwardMode mode{ad::Mode::Train, false, static_cast<std::uint64_t>(epoch)};
      ad::Var logits = forward(tape, params, p, data.features, mode);
      ad::Var loss = ad::nll_loss(tape, ad::log_softmax_rows(tape, logits), data.labels, split.train);
      const double lv = tape.value(loss)(0, 0);
      if (!std::isfinite(lv)) throw DivergenceError(epoch, lv);
      result.loss_curve.push_back(lv);
      tape.backward(loss);
    }
    alpha_opt.step();
    weight_opt.step();

    ad::Tape eval_tape;
    ad::Var logits = forward(eval_tape, params, p, data.features, ForwardMode{});
    const Matrix& out = eval_tape.value(logits);
    const double val_acc = split.val.empty() ? 0.0 : evaluate(out, data.labels, split.val);
    result.epochs_run = epoch + 1;
    if (val_acc > result.best_val_acc) {
      result.best_val_acc = val_acc;
      result.best_epoch = epoch;
      result.test_acc_at_best_val = split.test.empty() ? 0.0 : evaluate(out, data.labels, split.test);
      result.best_params = params;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.patience) {
      break;
    }
  }
  result.learned_alphas = result.best_params->effective_alphas();
  return result;
}

nlohmann::json to_json(const TrainResult& r) {
  return {{"config", config_to_json(r.config)},
          {"best_val_acc", r.best_val_acc},
          {"test_acc", r.test_acc_at_best_val},
          {"best_epoch", r.best_epoch},
          {"epochs", r.epochs_run},
          {"alphas", r.learned_alphas},
          {"seed", r.config.seed}};
}

void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

}  // namespace clenshaw
