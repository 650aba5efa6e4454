#include "clenshaw/models.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "clenshaw/linear_filters.hpp"

namespace clenshaw {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Clenshaw: return "clenshaw";
    case Variant::Horner: return "horner";
    case Variant::FixedParam: return "fixed-param";
    case Variant::Gcn: return "gcn";
    case Variant::Gcnii: return "gcnii";
  }
  return "unknown";
}

Variant parse_variant(std::string_view s) {
  for (Variant v : {Variant::Clenshaw, Variant::Horner, Variant::FixedParam, Variant::Gcn,
                    Variant::Gcnii}) {
    if (s == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (K < 0) throw std::invalid_argument("config: K must be >= 0");
  if (hidden < 1) throw std::invalid_argument("config: hidden must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("config: dropout in [0,1)");
  // beta_0 = log(lambda + 1) must stay within [0, 1].
  if (!(lambda >= 0.0 && lambda <= std::exp(1.0) - 1.0)) {
    throw std::invalid_argument("config: lambda must lie in [0, e - 1]");
  }
  if (!(fixed_alpha >= 0.0 && fixed_alpha <= 1.0)) {
    throw std::invalid_argument("config: fixed_alpha in [0,1]");
  }
  if (lr_alpha < 0.0 || lr_weights < 0.0 || wd < 0.0) {
    throw std::invalid_argument("config: learning rates and weight decay must be >= 0");
  }
  if (max_epochs < 1 || patience < 1) {
    throw std::invalid_argument("config: max_epochs and patience must be >= 1");
  }
}

double identity_mapping_beta(double lambda, int layer) {
  return std::log(lambda / static_cast<double>(layer + 1) + 1.0);
}

namespace {

bool learns_alphas(Variant v) { return v == Variant::Clenshaw || v == Variant::Horner; }

std::size_t layer_count(const ModelConfig& c) {
  const auto k = static_cast<std::size_t>(c.K);
  return (c.variant == Variant::Gcn || c.variant == Variant::Gcnii) ? k : k + 1;
}

ad::Parameter uniform_param(std::string name, std::size_t rows, std::size_t cols,
                            std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return ad::Parameter(std::move(name), std::move(m), ad::ParamGroup::Weight);
}

}  // namespace

std::vector<double> ModelParams::effective_alphas() const {
  if (learns_alphas(config.variant)) {
    std::vector<double> out;
    for (const auto& a : alphas) out.push_back(a.value(0, 0));
    return out;
  }
  if (config.variant == Variant::FixedParam) {
    auto c = fixed_param_coefficients(config.fixed_alpha, config.K);
    return {c.coeffs().begin(), c.coeffs().end()};
  }
  return {};
}

std::vector<ad::Parameter*> ModelParams::alpha_group() {
  std::vector<ad::Parameter*> out;
  for (auto& a : alphas) out.push_back(&a);
  return out;
}

std::vector<ad::Parameter*> ModelParams::weight_group() {
  std::vector<ad::Parameter*> out{&pre_w, &pre_b};
  for (auto& w : layer_w) out.push_back(&w);
  out.push_back(&post_w);
  out.push_back(&post_b);
  return out;
}

std::vector<ad::Parameter*> ModelParams::all() {
  auto out = weight_group();
  for (auto* a : alpha_group()) out.push_back(a);
  return out;
}

std::vector<const ad::Parameter*> ModelParams::all() const {
  auto out = const_cast<ModelParams*>(this)->all();
  return {out.begin(), out.end()};
}

ModelParams init_params(const ModelConfig& config, std::size_t in_features,
                        std::size_t num_classes) {
  config.validate();
  if (in_features == 0 || num_classes == 0) {
    throw std::invalid_argument("init_params: feature and class counts must be positive");
  }
  std::mt19937_64 rng(config.seed);
  ModelParams p;
  p.config = config;
  p.pre_w = uniform_param("pre_w", in_features, config.hidden, in_features, rng);
  p.pre_b = uniform_param("pre_b", 1, config.hidden, in_features, rng);
  for (std::size_t l = 0; l < layer_count(config); ++l) {
    p.layer_w.push_back(
        uniform_param("layer_w." + std::to_string(l), config.hidden, config.hidden, config.hidden, rng));
  }
  if (learns_alphas(config.variant)) {
    for (int l = 0; l <= config.K; ++l) {
      p.alphas.emplace_back("alpha." + std::to_string(l), Matrix(1, 1, l == config.K ? 1.0 : 0.0),
                            ad::ParamGroup::Alpha);
    }
  }
  p.post_w = uniform_param("post_w", config.hidden, num_classes, config.hidden, rng);
  p.post_b = uniform_param("post_b", 1, num_classes, config.hidden, rng);
  return p;
}

namespace {

struct LayerContext {
  ad::Tape& t;
  ModelParams& params;
  const ForwardMode& mode;

  bool train_dropout() const { return !mode.linear && mode.mode == ad::Mode::Train; }

  ad::Var maybe_dropout(ad::Var v, std::uint64_t layer_id) const {
    if (!train_dropout()) return v;
    return ad::dropout(t, v, params.config.dropout,
                       ad::dropout_stream(params.config.seed, layer_id, mode.epoch), mode.mode);
  }

  // sigma(z ((1 - beta) I + beta W)) for layer position l.
  ad::Var transform(ad::Var z, std::size_t l) const {
    if (mode.linear) return z;
    if (params.config.layer_dropout) z = maybe_dropout(z, 1 + l);
    ad::Var w = t.param(params.layer_w.at(l));
    ad::Var out =
        ad::identity_mapping(t, z, w, identity_mapping_beta(params.config.lambda, static_cast<int>(l)));
    return ad::relu(t, out);
  }
};

// Residue scalars as tape nodes: learned parameters or constants.
std::vector<ad::Var> residue_nodes(ad::Tape& t, ModelParams& params,
                                   const std::vector<double>* fixed) {
  std::vector<ad::Var> out;
  if (fixed != nullptr) {
    for (double a : *fixed) out.push_back(t.constant(Matrix(1, 1, a)));
  } else {
    for (auto& a : params.alphas) out.push_back(t.param(a));
  }
  return out;
}

// Shared body of the Clenshaw and Horner stacks:
// H^(l) = sigma((c P H^(l-1) [- H^(l-2)] + alpha_l H*) T_l).
ad::Var residue_stack(const LayerContext& ctx, const PropagationOperator& p, ad::Var h_star,
                      const std::vector<ad::Var>& residues, bool second_order) {
  ad::Tape& t = ctx.t;
  if (residues.size() != static_cast<std::size_t>(ctx.params.config.K) + 1) {
    throw std::invalid_argument("propagate: these parameters carry no learned residues for K+1 layers");
  }
  std::optional<ad::Var> prev1;
  std::optional<ad::Var> prev2;
  for (std::size_t l = 0; l < residues.size(); ++l) {
    ad::Var z = ad::scale(t, h_star, residues[l]);
    if (prev1) {
      ad::Var ph = ad::spmm_const(t, p, *prev1);
      if (second_order) ph = ad::scale(t, ph, 2.0);
      z = ad::add(t, ph, z);
    }
    if (second_order && prev2) z = ad::sub(t, z, *prev2);
    ad::Var h = ctx.transform(z, l);
    prev2 = prev1;
    prev1 = h;
  }
  return *prev1;
}

ad::Var gcn_stack(const LayerContext& ctx, const PropagationOperator& p, ad::Var h_star) {
  ad::Tape& t = ctx.t;
  ad::Var h = h_star;
  for (std::size_t l = 0; l < static_cast<std::size_t>(ctx.params.config.K); ++l) {
    ad::Var ph = ad::spmm_const(t, p, h);
    if (ctx.mode.linear) {
      h = ph;
      continue;
    }
    if (ctx.params.config.layer_dropout) ph = ctx.maybe_dropout(ph, 1 + l);
    h = ad::relu(t, ad::matmul(t, ph, t.param(ctx.params.layer_w.at(l))));
  }
  return h;
}

ad::Var gcnii_stack(const LayerContext& ctx, const PropagationOperator& p, ad::Var h_star,
                    double alpha) {
  ad::Tape& t = ctx.t;
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("gcnii: alpha in [0,1]");
  ad::Var h = h_star;
  ad::Var teleport = ad::scale(t, h_star, alpha);
  for (std::size_t l = 0; l < static_cast<std::size_t>(ctx.params.config.K); ++l) {
    ad::Var z = ad::add(t, ad::scale(t, ad::spmm_const(t, p, h), 1.0 - alpha), teleport);
    h = ctx.transform(z, l);
  }
  return h;
}

ad::Var propagate_variant(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                          ad::Var h_star, const ForwardMode& mode, Variant variant,
                          double fixed_alpha) {
  if (p.kind != OperatorKind::NormalizedAdjacency) {
    throw std::invalid_argument("propagate: expects the normalized adjacency");
  }
  if (t.value(h_star).rows() != p.size()) {
    throw DimensionError("propagate: H* rows do not match the operator size");
  }
  LayerContext ctx{t, params, mode};
  switch (variant) {
    case Variant::Clenshaw:
      return residue_stack(ctx, p, h_star, residue_nodes(t, params, nullptr), true);
    case Variant::Horner:
      return residue_stack(ctx, p, h_star, residue_nodes(t, params, nullptr), false);
    case Variant::FixedParam: {
      auto c = fixed_param_coefficients(fixed_alpha, params.config.K);
      std::vector<double> fixed(c.coeffs().begin(), c.coeffs().end());
      return residue_stack(ctx, p, h_star, residue_nodes(t, params, &fixed), true);
    }
    case Variant::Gcn: return gcn_stack(ctx, p, h_star);
    case Variant::Gcnii: return gcnii_stack(ctx, p, h_star, fixed_alpha);
  }
  throw std::invalid_argument("propagate: unknown variant");
}

ad::Var forward_variant(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                        const SignalMatrix& x, const ForwardMode& mode, Variant variant,
                        double fixed_alpha) {
  if (x.rows() != p.size()) throw DimensionError("forward: feature rows do not match graph size");
  ad::Var in = t.constant(x);
  if (mode.linear) return propagate_variant(t, params, p, in, mode, variant, fixed_alpha);

  if (x.cols() != params.in_features()) {
    throw DimensionError("forward: expected " + std::to_string(params.in_features()) +
                         " feature columns, got " + std::to_string(x.cols()));
  }
  LayerContext ctx{t, params, mode};
  const auto out_layer = static_cast<std::uint64_t>(params.config.K) + 2;
  ad::Var h_star = ad::relu(
      t, ad::add_row_bias(t, ad::matmul(t, ctx.maybe_dropout(in, 0), t.param(params.pre_w)),
                          t.param(params.pre_b)));
  ad::Var h = propagate_variant(t, params, p, h_star, mode, variant, fixed_alpha);
  return ad::add_row_bias(
      t, ad::matmul(t, ctx.maybe_dropout(h, out_layer), t.param(params.post_w)),
      t.param(params.post_b));
}

}  // namespace

ad::Var propagate(ad::Tape& t, ModelParams& params, const PropagationOperator& p, ad::Var h_star,
                  const ForwardMode& mode) {
  return propagate_variant(t, params, p, h_star, mode, params.config.variant,
                           params.config.fixed_alpha);
}

ad::Var forward(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                const SignalMatrix& x, const ForwardMode& mode) {
  return forward_variant(t, params, p, x, mode, params.config.variant, params.config.fixed_alpha);
}

ad::Var forward_clenshaw(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                         const SignalMatrix& x, const ForwardMode& mode) {
  return forward_variant(t, params, p, x, mode, Variant::Clenshaw, 0.0);
}

ad::Var forward_horner(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                       const SignalMatrix& x, const ForwardMode& mode) {
  return forward_variant(t, params, p, x, mode, Variant::Horner, 0.0);
}

ad::Var forward_fixed_param(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                            const SignalMatrix& x, const ForwardMode& mode, double fixed_alpha) {
  return forward_variant(t, params, p, x, mode, Variant::FixedParam, fixed_alpha);
}

ad::Var forward_gcn(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                    const SignalMatrix& x, const ForwardMode& mode) {
  return forward_variant(t, params, p, x, mode, Variant::Gcn, 0.0);
}

ad::Var forward_gcnii(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                      const SignalMatrix& x, const ForwardMode& mode, double fixed_alpha) {
  return forward_variant(t, params, p, x, mode, Variant::Gcnii, fixed_alpha);
}

std::vector<int> predict(const Matrix& logits) {
  std::vector<int> out(logits.rows(), 0);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"K", c.K},
          {"hidden", c.hidden},
          {"lambda", c.lambda},
          {"dropout", c.dropout},
          {"layer_dropout", c.layer_dropout},
          {"lr_alpha", c.lr_alpha},
          {"momentum", c.momentum},
          {"lr_weights", c.lr_weights},
          {"wd", c.wd},
          {"variant", std::string(to_string(c.variant))},
          {"fixed_alpha", c.fixed_alpha},
          {"seed", c.seed},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.K = j.value("K", c.K);
  c.hidden = j.value("hidden", c.hidden);
  c.lambda = j.value("lambda", c.lambda);
  c.dropout = j.value("dropout", c.dropout);
  c.layer_dropout = j.value("layer_dropout", c.layer_dropout);
  c.lr_alpha = j.value("lr_alpha", c.lr_alpha);
  c.momentum = j.value("momentum", c.momentum);
  c.lr_weights = j.value("lr_weights", c.lr_weights);
  c.wd = j.value("wd", c.wd);
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
  c.fixed_alpha = j.value("fixed_alpha", c.fixed_alpha);
  c.seed = j.value("seed", c.seed);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.validate();
  return c;
}

std::string checkpoint_to_json(const ModelParams& params) {
  nlohmann::json tensors = nlohmann::json::object();
  for (const ad::Parameter* p : params.all()) {
    tensors[p->name] = {{"shape", {p->value.rows(), p->value.cols()}},
                        {"values", std::vector<double>(p->value.values().begin(),
                                                       p->value.values().end())}};
  }
  nlohmann::json doc = {{"config", config_to_json(params.config)},
                        {"seed", params.config.seed},
                        {"in_features", params.in_features()},
                        {"num_classes", params.num_classes()},
                        {"params", tensors}};
  return doc.dump(2);
}

ModelParams checkpoint_from_json(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  ModelConfig cfg = config_from_json(doc.at("config"));
  ModelParams params =
      init_params(cfg, doc.at("in_features").get<std::size_t>(), doc.at("num_classes").get<std::size_t>());
  const auto& tensors = doc.at("params");
  for (ad::Parameter* p : params.all()) {
    const auto& entry = tensors.at(p->name);
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    auto values = entry.at("values").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] != p->value.rows() || shape[1] != p->value.cols()) {
      throw std::invalid_argument("checkpoint: shape mismatch for " + p->name);
    }
    p->value = Matrix(shape[0], shape[1], std::move(values));
    p->zero_grad();
  }
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  f << checkpoint_to_json(params) << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace clenshaw
