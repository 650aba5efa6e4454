#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clenshaw/graph.hpp"
#include "clenshaw/matrix.hpp"

namespace clenshaw::verify {

/// Outcome of one named check: the worst error seen across its cases.
struct CheckResult {
  CheckResult() = default;
  explicit CheckResult(std::string name) : name(std::move(name)) {}

  std::string name;
  std::size_t cases = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string worst_case;

  bool passed() const noexcept { return max_error <= tolerance; }
  /// Folds one case in, remembering the description of the worst one.
  void record(double error, const std::string& description);
};

struct Report {
  std::string suite;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::vector<CheckResult> checks;

  bool passed() const;
  nlohmann::json to_json() const;
};

/// Suite tags accepted by run_suite, "all" included.
const std::vector<std::string>& suite_names();
bool is_suite(std::string_view name);

/// Throws std::invalid_argument for an unknown suite tag.
Report run_suite(std::string_view suite, std::uint64_t seed, std::size_t trials);

// Individual checks. seed fully determines every random draw.
std::vector<CheckResult> clenshaw_scalar_checks(std::uint64_t seed, std::size_t cases = 1000);
CheckResult elimination_witness_check(std::uint64_t seed, std::size_t cases = 100);
std::vector<CheckResult> basis_conversion_checks(std::uint64_t seed);
std::vector<CheckResult> spectral_checks(std::uint64_t seed, std::size_t trials);
std::vector<CheckResult> theorem1_checks(std::uint64_t seed, std::size_t trials);
std::vector<CheckResult> theorem2_checks(std::uint64_t seed, std::size_t trials);
std::vector<CheckResult> gcnii_unfold_checks(std::uint64_t seed);
std::vector<CheckResult> gradient_checks(std::uint64_t seed, std::size_t coords_per_param = 20);
std::vector<CheckResult> model_checks(std::uint64_t seed, std::size_t trials);

// Deterministic random helpers shared with the tests.
double uniform(std::mt19937_64& rng, double lo, double hi);
std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi);
Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0);
/// Erdos-Renyi G(n, p).
Graph random_graph(std::size_t n, double p, std::mt19937_64& rng);

/// |a - b| / max(|a|, |b|, floor): relative above floor, absolute / floor below.
double gradient_relative_error(double analytic, double numeric, double floor = 1e-4);

}  // namespace clenshaw::verify
