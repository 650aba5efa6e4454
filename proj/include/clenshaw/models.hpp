#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clenshaw/autograd.hpp"
#include "clenshaw/graph.hpp"
#include "clenshaw/matrix.hpp"

namespace clenshaw {

enum class Variant { Clenshaw, Horner, FixedParam, Gcn, Gcnii };

std::string_view to_string(Variant v);
/// "clenshaw", "horner", "fixed-param", "gcn", "gcnii".
Variant parse_variant(std::string_view s);

struct ModelConfig {
  int K = 16;
  std::size_t hidden = 64;
  double lambda = 0.5;
  double dropout = 0.5;
  /// Also drop the input of every propagation layer's W^(l) transform.
  bool layer_dropout = true;
  double lr_alpha = 0.1;
  double momentum = 0.9;
  double lr_weights = 0.01;
  double wd = 1e-5;
  Variant variant = Variant::Clenshaw;
  /// Teleport weight for fixed-param and gcnii.
  double fixed_alpha = 0.1;
  std::uint64_t seed = 0;
  int max_epochs = 2000;
  int patience = 300;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// beta_l = log(lambda / (l + 1) + 1) for zero-based layer position l.
double identity_mapping_beta(double lambda, int layer);

struct ModelParams {
  ModelConfig config;
  ad::Parameter pre_w;   // f x hidden
  ad::Parameter pre_b;   // 1 x hidden
  std::vector<ad::Parameter> layer_w;  // hidden x hidden each
  std::vector<ad::Parameter> alphas;   // 1x1 each, layer order; empty when not learned
  ad::Parameter post_w;  // hidden x classes
  ad::Parameter post_b;  // 1 x classes

  std::size_t in_features() const noexcept { return pre_w.value.rows(); }
  std::size_t num_classes() const noexcept { return post_w.value.cols(); }

  /// Residue coefficients actually used by the propagation, in layer order
  /// (learned, fixed, or empty for gcn / gcnii).
  std::vector<double> effective_alphas() const;

  std::vector<ad::Parameter*> alpha_group();
  std::vector<ad::Parameter*> weight_group();
  std::vector<ad::Parameter*> all();
  std::vector<const ad::Parameter*> all() const;
};

/// Seeded symmetric-uniform weights (scale 1/sqrt(fan_in)) and residues
/// initialized to (0, ..., 0, 1).
ModelParams init_params(const ModelConfig& config, std::size_t in_features,
                        std::size_t num_classes);

struct ForwardMode {
  ad::Mode mode = ad::Mode::Eval;
  /// sigma = identity, every W^(l) = I, no dropout, identity pre/post MLPs.
  bool linear = false;
  std::uint64_t epoch = 0;
};

/// Propagation stack only, starting from H*. Returns H^(K).
ad::Var propagate(ad::Tape& t, ModelParams& params, const PropagationOperator& p, ad::Var h_star,
                  const ForwardMode& mode);

/// Full model: pre-MLP, propagation stack, post affine layer. Returns n x C
/// logits (n x f in linear mode, where both MLPs are the identity).
ad::Var forward(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                const SignalMatrix& x, const ForwardMode& mode);

ad::Var forward_clenshaw(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                         const SignalMatrix& x, const ForwardMode& mode);
ad::Var forward_horner(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                       const SignalMatrix& x, const ForwardMode& mode);
ad::Var forward_fixed_param(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                            const SignalMatrix& x, const ForwardMode& mode, double fixed_alpha);
ad::Var forward_gcn(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                    const SignalMatrix& x, const ForwardMode& mode);
ad::Var forward_gcnii(ad::Tape& t, ModelParams& params, const PropagationOperator& p,
                      const SignalMatrix& x, const ForwardMode& mode, double fixed_alpha);

/// Row-wise argmax, ties to the lowest class index.
std::vector<int> predict(const Matrix& logits);

nlohmann::json config_to_json(const ModelConfig& c);
/// Missing keys keep their defaults.
ModelConfig config_from_json(const nlohmann::json& j);

/// JSON checkpoint: {"config": ..., "seed": ..., "params": {name: {"shape",
/// "values"}}}.
std::string checkpoint_to_json(const ModelParams& params);
ModelParams checkpoint_from_json(const std::string& text);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace clenshaw
