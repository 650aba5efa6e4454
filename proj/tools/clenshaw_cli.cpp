// clenshaw: verification, training and spectral analysis front end.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clenshaw/graph.hpp"
#include "clenshaw/models.hpp"
#include "clenshaw/poly.hpp"
#include "clenshaw/spectral.hpp"
#include "clenshaw/train.hpp"
#include "clenshaw/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace clenshaw;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

/// Usage or IO problem; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("CLENSHAW_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("CLENSHAW_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path.string());
  f << text;
}

struct Manifest {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  std::vector<std::string> argv;
  std::string started_at = utc_now();

  void write(const fs::path& out_dir, int exit_code) const {
    json j{{"command", command},
           {"config", config},
           {"seed", seed},
           {"artifacts", artifacts},
           {"argv", argv},
           {"exit_code", exit_code},
           {"started_at", started_at},
           {"finished_at", utc_now()}};
    write_text(out_dir / (command + "_manifest.json"), j.dump(2) + "\n");
  }
};

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      const auto dots = part.find("..");
      if (dots == std::string::npos) {
        seeds.push_back(std::stoull(part));
        continue;
      }
      const auto lo = std::stoull(part.substr(0, dots));
      const auto hi = std::stoull(part.substr(dots + 2));
      if (hi < lo) throw UsageError("empty seed range " + part);
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } catch (const std::logic_error&) {
      throw UsageError("bad seed list '" + text + "' (use e.g. 0..4 or 1,3,5)");
    }
  }
  if (seeds.empty()) throw UsageError("empty seed list");
  return seeds;
}

std::vector<double> parse_number_list(const std::string& text, const std::string& source) {
  std::vector<double> out;
  std::string token;
  int line = 1;
  auto flush = [&]() {
    if (token.empty()) return;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || !std::isfinite(v)) {
      throw ParseError(source, line, "not a finite number: '" + token + "'");
    }
    out.push_back(v);
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      flush();
      if (c == '\n') ++line;
    } else {
      token += c;
    }
  }
  flush();
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Graph load_graph(const std::string& edges, std::int64_t num_nodes) {
  const auto list = read_edge_list(edges);
  if (num_nodes <= 0) {
    for (const auto& e : list) num_nodes = std::max({num_nodes, e.u + 1, e.v + 1});
  }
  if (num_nodes <= 0) throw UsageError(edges + ": empty edge list and no --num-nodes");
  return build_graph(list, num_nodes);
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string suite = "all";
  std::uint64_t seed = 0;
  std::size_t trials = 50;
};

int run_verify(const VerifyArgs& a, const fs::path& out_dir, Manifest& m) {
  m.config = {{"suite", a.suite}, {"trials", a.trials}};
  m.seed = a.seed;
  const auto report = verify::run_suite(a.suite, a.seed, a.trials);
  const std::string text = report.to_json().dump(2) + "\n";
  std::cout << text;
  const auto path = out_dir / "verify_report.json";
  write_text(path, text);
  m.artifacts.push_back(path.string());
  for (const auto& c : report.checks) {
    if (!c.passed()) {
      std::cerr << "FAIL " << c.name << ": max error " << format_double(c.max_error)
                << " > tolerance " << format_double(c.tolerance) << " at " << c.worst_case
                << " (seed " << a.seed << ")\n";
    }
  }
  return report.passed() ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string edges, features, labels, sbm;
  bool row_normalize = false;
  std::uint64_t data_seed = 0;
  std::string seeds;
  double train_frac = 0.6, val_frac = 0.2, test_frac = 0.2;
  std::string variant = "clenshaw";
  ModelConfig config;
};

Dataset train_dataset(const TrainArgs& a) {
  if (!a.sbm.empty()) {
    if (!a.edges.empty() || !a.features.empty() || !a.labels.empty()) {
      throw UsageError("--sbm cannot be combined with dataset paths");
    }
    SbmSpec spec;
    spec.seed = a.data_seed;
    if (a.sbm == "hetero-default") {
      spec.p_in = 0.02;
      spec.p_out = 0.2;
    } else if (a.sbm == "homo-default") {
      spec.p_in = 0.2;
      spec.p_out = 0.02;
    } else {
      throw UsageError("unknown --sbm preset '" + a.sbm + "' (hetero-default, homo-default)");
    }
    return generate_sbm(spec);
  }
  if (a.edges.empty() || a.features.empty() || a.labels.empty()) {
    throw UsageError("train needs --edges, --features and --labels, or --sbm");
  }
  for (const auto& p : {a.edges, a.features, a.labels}) {
    if (!fs::exists(p)) throw UsageError("no such file: " + p);
  }
  return load_dataset(a.edges, a.features, a.labels, LoadOptions{a.row_normalize});
}

int run_train(TrainArgs a, const fs::path& out_dir, Manifest& m) {
  a.config.variant = parse_variant(a.variant);
  const auto seeds = a.seeds.empty() ? std::vector<std::uint64_t>{default_seed()}
                                     : parse_seed_list(a.seeds);
  a.config.validate();
  const Dataset data = train_dataset(a);
  const bool learned = a.config.variant == Variant::Clenshaw || a.config.variant == Variant::Horner;

  m.config = config_to_json(a.config);
  m.config["data"] = a.sbm.empty()
                         ? json{{"edges", a.edges}, {"features", a.features}, {"labels", a.labels},
                                {"row_normalize", a.row_normalize}}
                         : json{{"sbm", a.sbm}, {"data_seed", a.data_seed}};
  m.config["split"] = {a.train_frac, a.val_frac, a.test_frac};
  m.config["seeds"] = seeds;
  m.seed = seeds.front();

  json runs = json::array();
  std::vector<double> accs;
  for (auto seed : seeds) {
    ModelConfig cfg = a.config;
    cfg.seed = seed;
    const Split split = random_split(data.num_nodes(), a.train_frac, a.val_frac, a.test_frac, seed);
    try {
      TrainResult r = train(data, split, cfg);
      json j = to_json(r);
      j["alphas_learned"] = learned;
      const auto ckpt = out_dir / ("checkpoint_seed" + std::to_string(seed) + ".json");
      if (r.best_params) {
        save_checkpoint(*r.best_params, ckpt);
        j["checkpoint"] = ckpt.string();
        m.artifacts.push_back(ckpt.string());
      }
      runs.push_back(j);
      accs.push_back(r.test_acc_at_best_val);
      std::cerr << "seed " << seed << ": test acc " << r.test_acc_at_best_val << " (val "
                << r.best_val_acc << ", best epoch " << r.best_epoch << ")\n";
    } catch (const DivergenceError& e) {
      runs.push_back({{"seed", seed}, {"error", e.what()}, {"epoch", e.epoch()}});
      std::cerr << "seed " << seed << ": " << e.what() << "\n";
    }
  }

  double mean = 0.0;
  double sd = 0.0;
  if (!accs.empty()) {
    for (double v : accs) mean += v;
    mean /= static_cast<double>(accs.size());
    if (accs.size() > 1) {
      for (double v : accs) sd += (v - mean) * (v - mean);
      sd = std::sqrt(sd / static_cast<double>(accs.size() - 1));
    }
  }
  json summary{{"variant", a.variant},
               {"alphas_learned", learned},
               {"runs", runs},
               {"completed", accs.size()},
               {"mean_test_acc", accs.empty() ? json(nullptr) : json(mean)},
               {"std_test_acc", accs.empty() ? json(nullptr) : json(sd)}};
  if (!learned && a.config.variant != Variant::Gcn) summary["fixed_alpha"] = a.config.fixed_alpha;
  const auto path = out_dir / "train_results.json";
  write_text(path, summary.dump(2) + "\n");
  m.artifacts.push_back(path.string());
  if (accs.empty()) {
    std::cout << "no seed completed\n";
    return kExitCheckFailed;
  }
  char line[128];
  std::snprintf(line, sizeof line, "mean test acc %.4f +- %.4f over %zu seed(s)\n", mean, sd,
                accs.size());
  std::cout << line;
  return accs.size() == seeds.size() ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------

struct FilterArgs {
  std::string alphas;
  std::string alphas_file;
  std::string checkpoint;
  std::string basis = "chebyshev-u";
  bool layer_order = false;
  std::size_t grid = 201;
  std::string points_file;
};

int run_filter_response(const FilterArgs& a, const fs::path& out_dir, Manifest& m) {
  const int sources = int(!a.alphas.empty()) + int(!a.alphas_file.empty()) + int(!a.checkpoint.empty());
  if (sources != 1) throw UsageError("give exactly one of --alphas, --alphas-file, --checkpoint");

  std::vector<double> coeffs;
  Basis basis = parse_basis(a.basis);
  bool layer_order = a.layer_order;
  if (!a.checkpoint.empty()) {
    const ModelParams params = load_checkpoint(a.checkpoint);
    switch (params.config.variant) {
      case Variant::Clenshaw:
      case Variant::FixedParam:
        basis = Basis::ChebyshevU;
        break;
      case Variant::Horner:
        basis = Basis::Monomial;
        break;
      default:
        throw UsageError("checkpoint variant " + std::string(to_string(params.config.variant)) +
                         " has no residue coefficients");
    }
    coeffs = params.effective_alphas();
    layer_order = true;
  } else if (!a.alphas.empty()) {
    coeffs = parse_number_list(a.alphas, "--alphas");
  } else {
    coeffs = parse_number_list(slurp(a.alphas_file), a.alphas_file);
  }
  if (coeffs.empty()) throw UsageError("no coefficients given");
  if (layer_order) std::reverse(coeffs.begin(), coeffs.end());
  const CoeffVector c(coeffs, basis);

  std::vector<double> points;
  if (!a.points_file.empty()) {
    std::string text = slurp(a.points_file);
    // Accept a spectrum dump with its "mu" header.
    if (text.rfind("mu", 0) == 0) text.erase(0, text.find('\n') == std::string::npos ? text.size() : text.find('\n'));
    points = parse_number_list(text, a.points_file);
  } else {
    if (a.grid == 0) throw UsageError("--grid must be positive");
    points = uniform_grid(a.grid);
  }

  std::string csv = "mu,h\n";
  for (const auto& [mu, h] : filter_response(c, points)) {
    csv += format_double(mu) + "," + format_double(h) + "\n";
  }
  std::cout << csv;
  const auto path = out_dir / "filter_response.csv";
  write_text(path, csv);
  m.artifacts.push_back(path.string());
  m.config = {{"basis", to_string(basis)},
              {"coefficients", coeffs},
              {"layer_order_input", layer_order},
              {"grid", a.points_file.empty() ? json(a.grid) : json(nullptr)},
              {"points_file", a.points_file},
              {"checkpoint", a.checkpoint}};
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GraphArgs {
  std::string edges;
  std::string labels;
  std::int64_t num_nodes = 0;
  std::size_t dense_limit = kDefaultDenseLimit;
};

int run_homophily(const GraphArgs& a, const fs::path& out_dir, Manifest& m) {
  if (a.edges.empty() || a.labels.empty()) throw UsageError("homophily needs --edges and --labels");
  for (const auto& p : {a.edges, a.labels}) {
    if (!fs::exists(p)) throw UsageError("no such file: " + p);
  }
  const auto labels = parse_labels(slurp(a.labels), a.labels);
  const Graph g = load_graph(a.edges, static_cast<std::int64_t>(labels.size()));
  const double h = homophily(g, labels);
  std::size_t isolated = 0;
  for (std::size_t u = 0; u < g.num_nodes(); ++u) isolated += g.degree(u) == 0;
  json j{{"homophily", h},
         {"num_nodes", g.num_nodes()},
         {"num_edges", g.num_edges()},
         {"isolated_nodes", isolated}};
  std::cout << j.dump(2) << "\n";
  const auto path = out_dir / "homophily.json";
  write_text(path, j.dump(2) + "\n");
  m.artifacts.push_back(path.string());
  m.config = {{"edges", a.edges}, {"labels", a.labels}};
  return kExitOk;
}

int run_spectrum(const GraphArgs& a, const fs::path& out_dir, Manifest& m) {
  if (a.edges.empty()) throw UsageError("spectrum needs --edges");
  if (!fs::exists(a.edges)) throw UsageError("no such file: " + a.edges);
  const Graph g = load_graph(a.edges, a.num_nodes);
  m.config = {{"edges", a.edges}, {"num_nodes", g.num_nodes()}, {"dense_limit", a.dense_limit}};
  if (g.num_nodes() > a.dense_limit) {
    throw UsageError("graph has " + std::to_string(g.num_nodes()) +
                     " nodes, above the dense eigensolver limit " + std::to_string(a.dense_limit) +
                     "; raise it with --dense-limit");
  }
  JacobiOptions opts;
  opts.dense_limit = a.dense_limit;
  const auto d = eig_sym(normalized_adjacency(g).matrix.to_dense(), opts);
  std::string csv = "mu\n";
  for (double mu : d.mu) csv += format_double(mu) + "\n";
  std::cout << csv;
  const auto path = out_dir / "spectrum.csv";
  write_text(path, csv);
  m.artifacts.push_back(path.string());
  return kExitOk;
}

int run(std::vector<std::string> args);

int run_replay(const std::string& manifest_path) {
  const json j = json::parse(slurp(manifest_path));
  auto argv = j.at("argv").get<std::vector<std::string>>();
  if (argv.size() >= 2 && argv[1] == "replay") throw UsageError("manifest records a replay");
  return run(argv);
}

int run(std::vector<std::string> args) {
  CLI::App app{"Clenshaw graph filtering: verification, training and spectral analysis", "clenshaw"};
  app.require_subcommand(1);
  std::string out_dir = ".";
  app.add_option("--out-dir", out_dir, "Directory for outputs and the run manifest");

  VerifyArgs va;
  va.seed = default_seed();
  auto* verify_cmd = app.add_subcommand("verify", "Run oracle checks and print a JSON report");
  verify_cmd->add_option("--suite", va.suite, "Check suite")
      ->check(CLI::IsMember(verify::suite_names()));
  verify_cmd->add_option("--seed", va.seed, "Seed (default: CLENSHAW_SEED or 0)");
  verify_cmd->add_option("--trials", va.trials, "Random instances per randomized check")
      ->check(CLI::PositiveNumber);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model on one dataset over several seeds");
  train_cmd->add_option("--edges", ta.edges, "Edge list file");
  train_cmd->add_option("--features", ta.features, "Feature CSV file");
  train_cmd->add_option("--labels", ta.labels, "Label file");
  train_cmd->add_flag("--row-normalize", ta.row_normalize, "Row-normalize features");
  train_cmd->add_option("--sbm", ta.sbm, "Synthetic dataset: hetero-default or homo-default");
  train_cmd->add_option("--data-seed", ta.data_seed, "Seed of the synthetic dataset");
  train_cmd->add_option("--seeds", ta.seeds, "Seeds, e.g. 0..4 or 1,3 (default: CLENSHAW_SEED or 0)");
  train_cmd->add_option("--variant", ta.variant, "Model")
      ->check(CLI::IsMember({"clenshaw", "horner", "fixed-param", "gcn", "gcnii"}));
  train_cmd->add_option("--k", ta.config.K, "Propagation depth");
  train_cmd->add_option("--hidden", ta.config.hidden, "Hidden width");
  train_cmd->add_option("--lambda", ta.config.lambda, "Identity-mapping strength");
  train_cmd->add_option("--dropout", ta.config.dropout, "Dropout rate");
  train_cmd->add_flag("--layer-dropout,!--no-layer-dropout", ta.config.layer_dropout,
                      "Dropout before every layer transform (default on)");
  train_cmd->add_option("--lr-alpha", ta.config.lr_alpha, "SGD learning rate of the residues");
  train_cmd->add_option("--momentum", ta.config.momentum, "SGD momentum of the residues");
  train_cmd->add_option("--lr", ta.config.lr_weights, "Adam learning rate of the weights");
  train_cmd->add_option("--wd", ta.config.wd, "Adam weight decay");
  train_cmd->add_option("--fixed-alpha", ta.config.fixed_alpha, "Teleport weight of fixed-param and gcnii");
  train_cmd->add_option("--max-epochs", ta.config.max_epochs, "Epoch cap");
  train_cmd->add_option("--patience", ta.config.patience, "Early-stopping patience");
  train_cmd->add_option("--train-frac", ta.train_frac, "Training fraction");
  train_cmd->add_option("--val-frac", ta.val_frac, "Validation fraction");
  train_cmd->add_option("--test-frac", ta.test_frac, "Test fraction");

  FilterArgs fa;
  auto* filter_cmd = app.add_subcommand("filter-response", "Evaluate a polynomial filter as CSV");
  filter_cmd->add_option("--alphas", fa.alphas, "Inline coefficients, comma separated");
  filter_cmd->add_option("--alphas-file", fa.alphas_file, "File of coefficients");
  filter_cmd->add_option("--checkpoint", fa.checkpoint, "Use the residues of a trained model");
  filter_cmd->add_option("--basis", fa.basis, "Coefficient basis")
      ->check(CLI::IsMember({"monomial", "chebyshev-u", "chebyshev-t"}));
  filter_cmd->add_flag("--layer-order", fa.layer_order,
                       "Coefficients are residues alpha_0..alpha_K; reverse them into the basis");
  filter_cmd->add_option("--grid", fa.grid, "Number of uniform points on [-1, 1]");
  filter_cmd->add_option("--points", fa.points_file, "Evaluate at the values in this file instead");

  GraphArgs ga;
  auto* homophily_cmd = app.add_subcommand("homophily", "Node homophily of a labeled graph");
  homophily_cmd->add_option("--edges", ga.edges, "Edge list file");
  homophily_cmd->add_option("--labels", ga.labels, "Label file");

  auto* spectrum_cmd = app.add_subcommand("spectrum", "Eigenvalues of the normalized adjacency");
  spectrum_cmd->add_option("--edges", ga.edges, "Edge list file");
  spectrum_cmd->add_option("--num-nodes", ga.num_nodes, "Node count (default: largest id + 1)");
  spectrum_cmd->add_option("--dense-limit", ga.dense_limit, "Largest graph for the dense solver");

  std::string manifest;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay_cmd->add_option("manifest", manifest, "Manifest file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*replay_cmd) return run_replay(manifest);

  Manifest m;
  m.argv = args;
  const fs::path out = out_dir;
  fs::create_directories(out);
  int code = kExitUsage;
  if (*verify_cmd) {
    m.command = "verify";
    code = run_verify(va, out, m);
  } else if (*train_cmd) {
    m.command = "train";
    code = run_train(ta, out, m);
  } else if (*filter_cmd) {
    m.command = "filter-response";
    code = run_filter_response(fa, out, m);
  } else if (*homophily_cmd) {
    m.command = "homophily";
    code = run_homophily(ga, out, m);
  } else if (*spectrum_cmd) {
    m.command = "spectrum";
    code = run_spectrum(ga, out, m);
  }
  m.write(out, code);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  clenshaw::retain_freed_memory();
  try {
    return run(std::vector<std::string>(argv, argv + argc));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kExitUsage;
}
