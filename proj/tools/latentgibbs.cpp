#include "latentgibbs/analysis.hpp"
#include "latentgibbs/error.hpp"
#include "latentgibbs/experiment.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

using namespace latentgibbs;
namespace fs = std::filesystem;

namespace {

int exit_code(ErrorCode c) {
  switch (c) {
  case ErrorCode::invalid_argument: return 2;
  case ErrorCode::unsupported_operator: return 3;
  case ErrorCode::convergence_failure: return 4;
  case ErrorCode::size_exceeded: return 5;
  case ErrorCode::grid_too_narrow: return 6;
  case ErrorCode::undefined_variance: return 7;
  case ErrorCode::io_failure: return 8;
  }
  return 1;
}

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> chains;
  std::optional<std::size_t> iters;
  std::optional<unsigned> threads;
};

void add_run_flags(CLI::App *cmd, Overrides &o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)")->required();
  cmd->add_option("--seed", o.seed, "override the seed");
  cmd->add_option("--out", o.out, "override the output directory");
  cmd->add_option("--chains", o.chains, "override the chain count");
  cmd->add_option("--iters", o.iters, "override the iteration count");
  cmd->add_option("--threads", o.threads, "worker threads");
}

int run(const Overrides &o, std::initializer_list<ExperimentKind> allowed,
        std::string_view command) {
  ExperimentConfig cfg = load_config(o.config);
  if (std::find(allowed.begin(), allowed.end(), cfg.kind) == allowed.end())
    fail(ErrorCode::invalid_argument, std::string(command) + " cannot run experiment '" +
                                          std::string(to_string(cfg.kind)) + "'");
  if (o.seed)
    cfg.seed = *o.seed;
  if (o.out)
    cfg.output = *o.out;
  if (o.chains)
    cfg.chains = *o.chains;
  if (o.iters)
    cfg.iterations = *o.iters;
  if (o.threads)
    cfg.threads = *o.threads;
  require(cfg.chains >= 1 && cfg.iterations >= 1, "chains and iterations must be positive");
  const Manifest m = run_experiment(cfg);
  std::cout << cfg.output << "/manifest.json " << m.config_hash << ' ' << std::fixed
            << std::setprecision(2) << m.wall_clock << "s\n";
  return 0;
}

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(cell);
  return out;
}

std::vector<double> read_column(const fs::path &path, const std::string &column) {
  std::ifstream is(path);
  if (!is)
    fail(ErrorCode::io_failure, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line))
    fail(ErrorCode::io_failure, path.string() + " is empty");
  const auto header = split(line);
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end())
    fail(ErrorCode::invalid_argument, "no column '" + column + "' in " + path.string());
  const auto idx = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    const auto cells = split(line);
    if (idx >= cells.size())
      fail(ErrorCode::io_failure, "short row in " + path.string());
    try {
      out.push_back(std::stod(cells[idx]));
    } catch (const std::exception &) {
      fail(ErrorCode::invalid_argument, "non-numeric value '" + cells[idx] + "'");
    }
  }
  require(!out.empty(), "column '" + column + "' has no rows");
  return out;
}

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  if (!is)
    fail(ErrorCode::io_failure, "cannot open " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int replay(const fs::path &manifest_path, const std::string &out) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(slurp(manifest_path));
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorCode::invalid_argument, std::string("manifest: ") + e.what());
  }
  require(m.contains("config") && m.contains("artifacts"), "manifest lacks config or artifacts");
  ExperimentConfig cfg = parse_config(m.at("config"));
  const fs::path original = manifest_path.parent_path();
  cfg.output = out;
  const Manifest fresh = run_experiment(cfg);
  if (fresh.config_hash != m.value("config_hash", std::string()))
    std::cerr << "warning: config hash differs from the manifest\n";
  std::size_t compared = 0, differing = 0;
  for (const auto &name : m.at("artifacts")) {
    const std::string file = name.get<std::string>();
    if (fs::path(file).extension() != ".csv")
      continue;
    ++compared;
    if (slurp(original / file) != slurp(fs::path(out) / file)) {
      ++differing;
      std::cout << "differs " << file << '\n';
    }
  }
  std::cout << compared - differing << '/' << compared << " CSV files identical\n";
  return differing == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Gibbs sampling of product-of-experts models through Gaussian latent machines"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Overrides prior_o, post_o, base_o, tree_o;
  auto *prior = app.add_subcommand("sample-prior", "run an image-prior experiment");
  add_run_flags(prior, prior_o);
  auto *post = app.add_subcommand("sample-posterior", "run a denoising or DCT posterior");
  add_run_flags(post, post_o);
  auto *base = app.add_subcommand(
      "baseline", "run a baseline topology, init-sensitivity or GMM parametrization study");
  add_run_flags(base, base_o);
  auto *tree = app.add_subcommand("direct-tree", "exact sampling on a tree-structured model");
  add_run_flags(tree, tree_o);

  auto *metrics = app.add_subcommand("metrics", "W1, ACF and efficiency from CSV columns");
  std::string m_input, m_column, m_ref_input, m_ref_column, m_acf_out;
  std::optional<std::string> m_ref_factor;
  std::size_t m_lag = 0;
  double m_threshold = 0.05;
  metrics->add_option("--input", m_input, "CSV file")->required();
  metrics->add_option("--column", m_column, "column of samples")->required();
  metrics->add_option("--ref-input", m_ref_input, "CSV with reference samples");
  metrics->add_option("--ref-column", m_ref_column, "reference column");
  metrics->add_option("--ref-factor", m_ref_factor,
                      "factor JSON whose density is the reference, e.g. {\"family\":\"laplace\"}");
  metrics->add_option("--max-lag", m_lag, "ACF lag (0: length / 5)");
  metrics->add_option("--threshold", m_threshold, "efficiency truncation threshold");
  metrics->add_option("--acf-out", m_acf_out, "write the ACF as CSV");

  auto *rep = app.add_subcommand("replay", "re-run a manifest and compare its CSVs byte for byte");
  std::string r_manifest, r_out;
  rep->add_option("--manifest", r_manifest, "manifest.json of a finished run")->required();
  rep->add_option("--out", r_out, "directory for the re-run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*prior)
      return run(prior_o, {ExperimentKind::image_prior}, "sample-prior");
    if (*post)
      return run(post_o, {ExperimentKind::posterior_denoise, ExperimentKind::posterior_dct},
                 "sample-posterior");
    if (*base)
      return run(base_o,
                 {ExperimentKind::baseline_topology, ExperimentKind::init_sensitivity,
                  ExperimentKind::gmm_parametrization},
                 "baseline");
    if (*tree)
      return run(tree_o, {ExperimentKind::tree_direct}, "direct-tree");
    if (*rep)
      return replay(r_manifest, r_out);
    if (*metrics) {
      const auto x = read_column(m_input, m_column);
      std::cout << std::setprecision(10) << "count," << x.size() << '\n';
      if (!m_ref_column.empty()) {
        const auto ref = read_column(m_ref_input.empty() ? m_input : m_ref_input, m_ref_column);
        std::cout << "w1," << wasserstein1(x, ref) << '\n';
      }
      if (m_ref_factor) {
        nlohmann::json spec;
        try {
          spec = nlohmann::json::parse(*m_ref_factor);
        } catch (const nlohmann::json::exception &e) {
          fail(ErrorCode::invalid_argument, std::string("--ref-factor: ") + e.what());
        }
        const Factor f = parse_factor(spec);
        std::cout << "w1," << wasserstein1(x, ground_truth_marginal(MarginalClass::factor, f))
                  << '\n';
      }
      const std::size_t lag = m_lag == 0 ? x.size() / 5 : m_lag;
      if (lag >= 1 && x.size() > lag) {
        const auto rho = acf(x, lag);
        std::cout << "efficiency," << sampling_efficiency(rho, m_threshold) << '\n';
        if (!m_acf_out.empty()) {
          std::ofstream os(m_acf_out);
          if (!os)
            fail(ErrorCode::io_failure, "cannot open " + m_acf_out);
          write_acf_csv(os, acf_table({rho}));
        }
      }
      return 0;
    }
  } catch (const Error &e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception &e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
