#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "clenshaw/graph.hpp"
#include "clenshaw/matrix.hpp"
#include "clenshaw/models.hpp"

namespace clenshaw {

struct Dataset {
  Graph graph;
  SignalMatrix features;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t num_nodes() const noexcept { return labels.size(); }
  std::size_t num_classes() const;
  /// Throws std::invalid_argument unless rows, labels and graph agree and C >= 2.
  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

struct LoadOptions {
  bool row_normalize = false;
};

/// Edge list ("u v [w]"), feature CSV (one row per node) and labels (one
/// integer per line). The node count comes from the feature/label files.
Dataset load_dataset(const std::filesystem::path& edge_file,
                     const std::filesystem::path& feature_file,
                     const std::filesystem::path& label_file, const LoadOptions& opts = {});

SignalMatrix parse_feature_csv(const std::string& text, const std::string& source = "<features>");
std::vector<int> parse_labels(const std::string& text, const std::string& source = "<labels>");

/// Seeded shuffle of 0..n-1, then contiguous train/val/test slices of sizes
/// floor(n * p_train), floor(n * p_val) and floor(n * p_test).
Split random_split(std::size_t n, double p_train = 0.6, double p_val = 0.2, double p_test = 0.2,
                   std::uint64_t seed = 0);

struct SbmSpec {
  std::size_t n_per_block = 200;
  std::size_t blocks = 2;
  double p_in = 0.02;
  double p_out = 0.2;
  std::size_t feature_dim = 16;
  double noise = 1.0;
  std::uint64_t seed = 0;
};

/// Stochastic block model; block index is the class label. Features are a
/// per-class mean vector plus N(0, noise^2) entries.
Dataset generate_sbm(const SbmSpec& spec);

/// Mean over non-isolated nodes of the fraction of neighbours sharing the
/// node's label.
double homophily(const Graph& g, std::span<const int> labels);

/// Fraction of masked rows whose argmax matches the label.
double evaluate(const Matrix& logits, std::span<const int> labels,
                std::span<const std::size_t> mask);

struct TrainResult {
  double best_val_acc = 0.0;
  double test_acc_at_best_val = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<double> loss_curve;
  std::vector<double> learned_alphas;
  ModelConfig config;
  std::optional<ModelParams> best_params;
};

/// Raised when the training loss stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, double loss)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                           " (loss " + std::to_string(loss) + ")"),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Full-graph training with early stopping on validation accuracy.
TrainResult train(const Dataset& data, const Split& split, const ModelConfig& config);

nlohmann::json to_json(const TrainResult& r);

/// Keeps freed matrix buffers in the heap instead of unmapping them, which
/// removes per-epoch page faults during training. glibc only, otherwise a
/// no-op. Call once from main.
void retain_freed_memory();

}  // namespace clenshaw
