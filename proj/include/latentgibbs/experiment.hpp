#pragma once

#include "latentgibbs/analysis.hpp"
#include "latentgibbs/gaussian_sampler.hpp"
#include "latentgibbs/glm.hpp"
#include "latentgibbs/topologies.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace latentgibbs {

inline constexpr std::string_view kVersion = "0.1.0";

enum class ExperimentKind {
  baseline_topology,
  image_prior,
  init_sensitivity,
  gmm_parametrization,
  posterior_denoise,
  posterior_dct,
  tree_direct,
};

enum class SamplerKind { gibbs, mala, direct };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::gibbs;
  CgConfig cg;
  /// 0 runs the dual-averaging helper before sampling.
  double mala_step = 0.0;
  double mala_target = 0.57;
  std::size_t mala_tune_iterations = 3000;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::baseline_topology;
  SamplerSpec sampler;
  std::size_t chains = 1000;
  std::size_t iterations = 50;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string output = "out";
  /// Kind-specific model section, validated when the experiment runs.
  nlohmann::json model = nlohmann::json::object();
  std::size_t floor_replicates = 10;
  /// 0 selects iterations / 5.
  std::size_t max_lag = 0;
  std::size_t acf_chains = 100;
  /// Upper bound on recorded scalars (chains x iterations x functionals).
  std::size_t memory_budget = 200'000'000;
};

std::string_view to_string(ExperimentKind k);
std::string_view to_string(SamplerKind k);

Factor parse_factor(const nlohmann::json &spec);
nlohmann::json factor_to_json(const Factor &f);

ExperimentConfig parse_config(const nlohmann::json &j);
ExperimentConfig load_config(const std::filesystem::path &path);
/// Canonical form, including defaults; the manifest stores it for replay.
nlohmann::json config_to_json(const ExperimentConfig &cfg);
/// FNV-1a 64 of the canonical JSON text, as 16 hex digits.
std::string config_hash(const ExperimentConfig &cfg);

struct Manifest {
  std::string config_hash;
  std::string version{kVersion};
  ExperimentKind kind = ExperimentKind::baseline_topology;
  double wall_clock = 0.0;
  std::vector<std::pair<std::string, double>> phases;
  std::vector<std::string> artifacts;
  bool partial = false;
  std::string error;
  nlohmann::json config;
};

nlohmann::json manifest_to_json(const Manifest &m);

/// Runs the pipeline of cfg.kind and writes CSVs, images and manifest.json
/// into cfg.output. On failure the manifest is written with partial = true
/// and the error is rethrown with the experiment kind prepended.
Manifest run_experiment(const ExperimentConfig &cfg);

// Building blocks shared by the pipelines and the acceptance suite.

/// c * 1 with Euclidean norm `norm`.
Vector constant_init(Index n, double norm);

/// Every functional of every marginal set, in order.
RecorderSpec baseline_recorder(const Baseline &b);

/// Gibbs or MALA chains. A zero MALA step is tuned first; the step used and
/// the acceptance rate are reported through the optional pointers.
SampleStore run_sampler(const GlmModel &model, const Vector &x0, const SamplerSpec &spec,
                        const RunOptions &opts, const RecorderSpec &recorder,
                        double *step_used = nullptr, double *accept_rate = nullptr);

struct MarginalCurve {
  MarginalClass cls;
  /// W1 of the pooled functionals of the class per iteration.
  std::vector<double> w1;
  double floor = 0.0;
  /// First index (into the store) of the class's functionals.
  std::size_t first_functional = 0;
  std::size_t functional_count = 0;
};

/// W1 against the closed-form ground truth per marginal class, pooling all
/// chains and equivalent functionals, with the noise floor at the pooled size.
std::vector<MarginalCurve> baseline_curves(const Baseline &b, const Factor &phi,
                                           const SampleStore &store,
                                           std::size_t floor_replicates, std::uint64_t seed);

/// All chains' values of functionals [first, first + count) at iteration iter.
std::vector<double> pooled_values(const SampleStore &store, std::size_t first,
                                  std::size_t count, std::size_t iter);

/// Per-chain ACFs of functional k over the second half of the run for the
/// first min(chains, max_chains) chains.
std::vector<std::vector<double>> second_half_acfs(const SampleStore &store, std::size_t k,
                                                  std::size_t max_lag, std::size_t max_chains);
std::vector<double> efficiencies(const std::vector<std::vector<double>> &acfs,
                                 double threshold = 0.05);

/// Piecewise-constant test image in [0, 1] with a ramp, row-major.
Vector synthetic_image(Index height, Index width);
/// Kept DCT coefficients: the low-frequency (h/3) x (w/3) block plus a
/// uniformly random 75% of the rest, sorted.
std::vector<Index> dct_mask(Index height, Index width, Rng &rng);
/// Pixels with a neighbour (4-connected, non-circular) differing by more
/// than `threshold`, so the ramp does not count.
std::vector<bool> edge_pixels(const Vector &image, Index height, Index width,
                              double threshold = 0.1);

/// Lowest nonconstant Fourier mode of the circular Laplacian K^T K on a
/// height x width grid, normalized; the prior's representative marginal.
Vector second_eigenvector(Index height, Index width);

} // namespace latentgibbs
