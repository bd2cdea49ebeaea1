#include "latentgibbs/experiment.hpp"

#include "latentgibbs/direct.hpp"
#include "latentgibbs/error.hpp"
#include "latentgibbs/mala.hpp"
#include "latentgibbs/pgm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace latentgibbs {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::pair<ExperimentKind, std::string_view> kKindNames[] = {
    {ExperimentKind::baseline_topology, "baseline-topology"},
    {ExperimentKind::image_prior, "image-prior"},
    {ExperimentKind::init_sensitivity, "init-sensitivity"},
    {ExperimentKind::gmm_parametrization, "gmm-parametrization"},
    {ExperimentKind::posterior_denoise, "posterior-denoise"},
    {ExperimentKind::posterior_dct, "posterior-dct"},
    {ExperimentKind::tree_direct, "tree-direct"},
};

ExperimentKind parse_kind(std::string_view s) {
  for (auto [k, name] : kKindNames)
    if (name == s)
      return k;
  fail(ErrorCode::invalid_argument, "unknown experiment kind '" + std::string(s) + "'");
}

SamplerKind parse_sampler(std::string_view s) {
  for (auto k : {SamplerKind::gibbs, SamplerKind::mala, SamplerKind::direct})
    if (to_string(k) == s)
      return k;
  fail(ErrorCode::invalid_argument, "unknown sampler '" + std::string(s) + "'");
}

void check_keys(const json &j, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  require(j.is_object(), std::string(where) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      fail(ErrorCode::invalid_argument,
           "unknown key '" + it.key() + "' in " + std::string(where));
}

template <class T> T get_or(const json &j, const char *key, T fallback) {
  if (!j.contains(key))
    return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &e) {
    fail(ErrorCode::invalid_argument, std::string("config key '") + key + "': " + e.what());
  }
}

template <class T> T get_req(const json &j, const char *key) {
  if (!j.contains(key))
    fail(ErrorCode::invalid_argument, std::string("missing config key '") + key + "'");
  return get_or<T>(j, key, T{});
}

// FNV-1a, 64 bit.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

class CsvWriter {
public:
  CsvWriter(const fs::path &path, std::string_view header) : os_(path) {
    if (!os_)
      fail(ErrorCode::io_failure, "cannot open " + path.string());
    os_ << header << '\n' << std::setprecision(17);
  }
  template <class... Ts> void row(const Ts &...v) {
    bool first = true;
    ((os_ << (first ? "" : ",") << v, first = false), ...);
    os_ << '\n';
  }
private:
  std::ofstream os_;
};

struct Context {
  const ExperimentConfig &cfg;
  Manifest &manifest;
  fs::path dir;
  std::chrono::steady_clock::time_point mark = std::chrono::steady_clock::now();

  void phase(std::string name) {
    const auto now = std::chrono::steady_clock::now();
    manifest.phases.emplace_back(std::move(name),
                                 std::chrono::duration<double>(now - mark).count());
    mark = now;
  }
  fs::path artifact(const std::string &name) {
    manifest.artifacts.push_back(name);
    return dir / name;
  }
};

std::size_t resolved_lag(const ExperimentConfig &cfg) {
  return cfg.max_lag == 0 ? cfg.iterations / 5 : cfg.max_lag;
}

void check_budget(const ExperimentConfig &cfg, std::size_t functionals) {
  const double total = static_cast<double>(cfg.chains) * static_cast<double>(cfg.iterations) *
                       static_cast<double>(functionals);
  if (total > static_cast<double>(cfg.memory_budget))
    fail(ErrorCode::size_exceeded, "recorded scalars exceed the memory budget");
}

RunOptions run_options(const ExperimentConfig &cfg, std::uint64_t seed) {
  return RunOptions{cfg.iterations, cfg.chains, seed, cfg.threads};
}

struct CurveSummary {
  std::string marginal;
  double floor;
  std::size_t to_floor;
  double final_w1;
};

// W1 curves, ACFs and efficiencies of one baseline run; returns the summary rows.
std::vector<CurveSummary> write_baseline_outputs(Context &ctx, const Baseline &b,
                                                 const Factor &phi, const SampleStore &store,
                                                 const std::string &prefix,
                                                 std::uint64_t floor_seed) {
  const auto curves =
      baseline_curves(b, phi, store, ctx.cfg.floor_replicates, floor_seed);
  std::vector<CurveSummary> out;
  for (const auto &c : curves) {
    const std::string name(to_string(c.cls));
    std::ofstream os(ctx.artifact(prefix + "w1_" + name + ".csv"));
    write_w1_csv(os, c.w1);
    out.push_back({name, c.floor, first_below(c.w1, 2.0 * c.floor), c.w1.back()});
  }
  const std::size_t lag = resolved_lag(ctx.cfg);
  if (lag >= 1 && ctx.cfg.iterations - ctx.cfg.iterations / 2 > 2 * lag) {
    CsvWriter eff(ctx.artifact(prefix + "efficiency.csv"), "marginal,mean,std");
    for (const auto &c : curves) {
      const auto acfs = second_half_acfs(store, c.first_functional, lag, ctx.cfg.acf_chains);
      std::ofstream os(ctx.artifact(prefix + "acf_" + std::string(to_string(c.cls)) + ".csv"));
      write_acf_csv(os, acf_table(acfs));
      const auto ms = mean_std(efficiencies(acfs));
      eff.row(to_string(c.cls), ms.mean, ms.std);
    }
  }
  return out;
}

void write_sampler_info(Context &ctx, const std::string &prefix, double step, double accept) {
  if (ctx.cfg.sampler.kind != SamplerKind::mala)
    return;
  CsvWriter w(ctx.artifact(prefix + "mala.csv"), "step_size,accept_rate");
  w.row(step, accept);
}

void run_baseline_family(Context &ctx) {
  const ExperimentConfig &cfg = ctx.cfg;
  const json &m = cfg.model;
  const bool init_mode = cfg.kind == ExperimentKind::init_sensitivity;
  const bool gmm_mode = cfg.kind == ExperimentKind::gmm_parametrization;
  if (gmm_mode)
    check_keys(m, {"topology", "b", "parametrization", "components", "phi0"}, "model");
  else
    check_keys(m, {"topology", "factor", "phi0", "init_norm", "init_norms"}, "model");
  require(cfg.sampler.kind != SamplerKind::direct,
          "baselines run with the gibbs or mala sampler");

  const Topology top = parse_topology(get_req<std::string>(m, "topology"));
  const Factor phi0 =
      m.contains("phi0") ? parse_factor(m.at("phi0")) : Factor::normal(0.0, 1.0);

  struct Case {
    std::string prefix;
    std::string label;
    Factor phi;
    double init_norm;
  };
  std::vector<Case> cases;
  if (gmm_mode) {
    const double b = get_or<double>(m, "b", 1.0);
    const auto param = get_or<std::string>(m, "parametrization", "gsm");
    require(param == "gsm" || param == "uniform-means",
            "parametrization must be gsm or uniform-means");
    const auto ls = get_req<std::vector<std::size_t>>(m, "components");
    require(!ls.empty(), "components must not be empty");
    for (std::size_t l : ls) {
      Factor f = param == "gsm" ? gsm_discretize_laplace(b, l) : uniform_means_laplace_gmm(b, l);
      cases.push_back({"L" + std::to_string(l) + "_", std::to_string(l), std::move(f), 0.0});
    }
  } else {
    const Factor phi = parse_factor(get_req<json>(m, "factor"));
    if (init_mode) {
      const auto norms = get_req<std::vector<double>>(m, "init_norms");
      require(!norms.empty(), "init_norms must not be empty");
      for (double nrm : norms) {
        std::ostringstream label;
        label << nrm;
        cases.push_back({"init" + label.str() + "_", label.str(), phi, nrm});
      }
    } else {
      cases.push_back({"", "", phi, get_or<double>(m, "init_norm", 0.0)});
    }
  }

  std::unique_ptr<CsvWriter> summary;
  if (init_mode)
    summary = std::make_unique<CsvWriter>(ctx.artifact("summary.csv"),
                                          "init_norm,marginal,floor,iterations_to_floor,final_w1");
  else if (gmm_mode)
    summary = std::make_unique<CsvWriter>(ctx.artifact("summary.csv"),
                                          "components,marginal,floor,iterations_to_floor,final_w1");
  else
    summary = std::make_unique<CsvWriter>(ctx.artifact("summary.csv"),
                                          "marginal,floor,iterations_to_floor,final_w1");
  ctx.phase("setup");

  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const Case &c = cases[ci];
    const Baseline b = build_baseline(top, c.phi, phi0);
    const RecorderSpec rec = baseline_recorder(b);
    check_budget(cfg, rec.functionals.size());
    const Vector x0 = constant_init(b.model.n(), c.init_norm);
    double step = 0.0, accept = 0.0;
    const SampleStore store =
        run_sampler(b.model, x0, cfg.sampler, run_options(cfg, cfg.seed), rec, &step, &accept);
    ctx.phase("sample " + (c.label.empty() ? std::string(to_string(top)) : c.label));
    const auto rows = write_baseline_outputs(ctx, b, c.phi, store, c.prefix,
                                             cfg.seed ^ (0x9e3779b97f4a7c15ull + ci));
    write_sampler_info(ctx, c.prefix, step, accept);
    for (const auto &r : rows) {
      if (c.label.empty())
        summary->row(r.marginal, r.floor, r.to_floor, r.final_w1);
      else
        summary->row(c.label, r.marginal, r.floor, r.to_floor, r.final_w1);
    }
    ctx.phase("analysis " + (c.label.empty() ? std::string(to_string(top)) : c.label));
  }
}

void run_image_prior(Context &ctx) {
  const ExperimentConfig &cfg = ctx.cfg;
  const json &m = cfg.model;
  check_keys(m, {"height", "width", "factor", "lambda", "isotropic", "phi0"}, "model");
  require(cfg.sampler.kind != SamplerKind::direct, "image priors need gibbs or mala");
  const auto h = get_req<Index>(m, "height");
  const auto w = get_req<Index>(m, "width");
  require(h >= 1 && w >= 1 && h * w >= 2, "image size must be at least 2 pixels");
  const Factor phi = parse_factor(get_req<json>(m, "factor"));
  const Factor phi0 =
      m.contains("phi0") ? parse_factor(m.at("phi0")) : Factor::normal(0.0, 1.0);
  const GlmModel model = extend_improper(
      build_image_prior(h, w, phi, get_or<double>(m, "lambda", 1.0),
                        get_or<bool>(m, "isotropic", false)),
      phi0);
  RecorderSpec rec{{second_eigenvector(h, w)}, true};
  check_budget(cfg, 1);
  ctx.phase("setup");

  double step = 0.0, accept = 0.0;
  const SampleStore store = run_sampler(model, Vector::Zero(model.n()), cfg.sampler,
                                        run_options(cfg, cfg.seed), rec, &step, &accept);
  ctx.phase("sample");

  // Reference: empirical marginal at the final iteration.
  const auto reference = store.across_chains(0, cfg.iterations - 1);
  std::vector<double> curve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it)
    curve[it] = wasserstein1(store.across_chains(0, it), reference);
  {
    std::ofstream os(ctx.artifact("w1.csv"));
    write_w1_csv(os, curve);
  }
  const std::size_t lag = resolved_lag(cfg);
  if (lag >= 1 && cfg.iterations - cfg.iterations / 2 > 2 * lag) {
    const auto acfs = second_half_acfs(store, 0, lag, cfg.acf_chains);
    std::ofstream os(ctx.artifact("acf.csv"));
    write_acf_csv(os, acf_table(acfs));
    CsvWriter eff(ctx.artifact("efficiency.csv"), "marginal,mean,std");
    const auto ms = mean_std(efficiencies(acfs));
    eff.row("eigenvector", ms.mean, ms.std);
  }
  write_sampler_info(ctx, "", step, accept);
  emit_pgm(store.final_states.col(0), h, w, ctx.artifact("sample.pgm"), PgmMapping::affine);
  ctx.phase("analysis");
}

struct PosteriorModel {
  Index h, w;
  double sigma;
  GlmModel prior;
  std::size_t instances;
  bool naive_init;
};

PosteriorModel parse_posterior(const json &m) {
  check_keys(m, {"height", "width", "sigma", "prior", "instances", "init"}, "model");
  const auto h = get_req<Index>(m, "height");
  const auto w = get_req<Index>(m, "width");
  require(h >= 2 && w >= 2, "posterior image must be at least 2 x 2");
  const double sigma = get_req<double>(m, "sigma");
  require(sigma > 0.0, "sigma must be positive");
  const json &p = get_req<json>(m, "prior");
  check_keys(p, {"factor", "lambda", "isotropic"}, "model.prior");
  GlmModel prior = build_image_prior(h, w, parse_factor(get_req<json>(p, "factor")),
                                     get_or<double>(p, "lambda", 1.0),
                                     get_or<bool>(p, "isotropic", false));
  const auto init = get_or<std::string>(m, "init", "naive");
  require(init == "naive" || init == "zeros", "init must be naive or zeros");
  return {h, w, sigma, std::move(prior), get_or<std::size_t>(m, "instances", 1), init == "naive"};
}

void run_posterior(Context &ctx, bool dct) {
  const ExperimentConfig &cfg = ctx.cfg;
  require(cfg.sampler.kind != SamplerKind::direct, "posteriors need gibbs or mala");
  const PosteriorModel pm = parse_posterior(cfg.model);
  require(pm.instances >= 1, "instances must be positive");
  const Index n = pm.h * pm.w;
  const Vector truth = synthetic_image(pm.h, pm.w);
  const auto edges = edge_pixels(truth, pm.h, pm.w);
  CsvWriter psnr_csv(ctx.artifact("psnr.csv"), "instance,psnr_naive,psnr_mean,boost");
  CsvWriter std_csv(ctx.artifact("std_edges.csv"), "instance,mean_std_edge,mean_std_flat");
  ctx.phase("setup");

  for (std::size_t inst = 0; inst < pm.instances; ++inst) {
    Rng noise = make_stream(cfg.seed, 0x6e6f697365ull + inst);
    Vector y, naive;
    GlmModel post = [&] {
      if (!dct) {
        y = truth;
        for (Index i = 0; i < n; ++i)
          y[i] += pm.sigma * standard_normal(noise);
        naive = y;
        return build_posterior_denoising(pm.prior, y, pm.sigma * pm.sigma);
      }
      const auto mask = dct_mask(pm.h, pm.w, noise);
      const Vector coeffs = dct2d(pm.h, pm.w).apply(truth);
      y.resize(static_cast<Index>(mask.size()));
      for (std::size_t k = 0; k < mask.size(); ++k)
        y[static_cast<Index>(k)] = coeffs[mask[k]] + pm.sigma * standard_normal(noise);
      naive = zero_fill(pm.h, pm.w, y, mask);
      return build_posterior_dct_inpaint(pm.prior, pm.h, pm.w, y, mask, pm.sigma * pm.sigma);
    }();
    const Vector x0 = pm.naive_init ? naive : Vector::Zero(n);
    double step = 0.0, accept = 0.0;
    const SampleStore store = run_sampler(post, x0, cfg.sampler,
                                          run_options(cfg, cfg.seed + inst), {{}, true},
                                          &step, &accept);
    ctx.phase("sample " + std::to_string(inst));

    const Matrix &fs = store.final_states;
    const Vector mean = fs.rowwise().mean();
    Vector sd(n);
    for (Index i = 0; i < n; ++i) {
      const double c = static_cast<double>(fs.cols());
      const double var = (fs.row(i).array() - mean[i]).square().sum() / std::max(c - 1.0, 1.0);
      sd[i] = std::sqrt(var);
    }
    const std::span<const double> t(truth.data(), static_cast<std::size_t>(n));
    const double p_naive = psnr(std::span<const double>(naive.data(), t.size()), t);
    const double p_mean = psnr(std::span<const double>(mean.data(), t.size()), t);
    psnr_csv.row(inst, p_naive, p_mean, p_mean - p_naive);
    double se = 0.0, sf = 0.0;
    std::size_t ne = 0, nf = 0;
    for (Index i = 0; i < n; ++i) {
      if (edges[static_cast<std::size_t>(i)]) {
        se += sd[i];
        ++ne;
      } else {
        sf += sd[i];
        ++nf;
      }
    }
    std_csv.row(inst, ne ? se / static_cast<double>(ne) : 0.0,
                nf ? sf / static_cast<double>(nf) : 0.0);
    const std::string tag = "instance" + std::to_string(inst) + "_";
    emit_pgm(mean, pm.h, pm.w, ctx.artifact(tag + "mean.pgm"), PgmMapping::clip01);
    emit_pgm(sd, pm.h, pm.w, ctx.artifact(tag + "std.pgm"), PgmMapping::clip01, 100.0);
    emit_pgm(naive, pm.h, pm.w, ctx.artifact(tag + "naive.pgm"), PgmMapping::clip01);
    if (inst == 0)
      emit_pgm(truth, pm.h, pm.w, ctx.artifact("truth.pgm"), PgmMapping::clip01);
    write_sampler_info(ctx, tag, step, accept);
    ctx.phase("analysis " + std::to_string(inst));
  }
}

void run_tree_direct(Context &ctx) {
  const ExperimentConfig &cfg = ctx.cfg;
  const json &m = cfg.model;
  check_keys(m, {"nodes", "parents", "edge_factor", "phi0"}, "model");
  require(cfg.sampler.kind == SamplerKind::direct, "tree-direct needs the direct sampler");
  require(cfg.chains >= 1, "tree-direct needs at least one draw");
  const DirectedTree tree = m.contains("parents")
                                ? DirectedTree(get_req<std::vector<Index>>(m, "parents"))
                                : DirectedTree::chain(get_req<Index>(m, "nodes"));
  const Factor edge = parse_factor(get_req<json>(m, "edge_factor"));
  const Factor phi0 =
      m.contains("phi0") ? parse_factor(m.at("phi0")) : Factor::normal(0.0, 1.0);
  const auto &edges = tree.edges();
  ExperimentConfig one_draw = cfg;
  one_draw.iterations = 1;
  check_budget(one_draw, edges.size());
  ctx.phase("setup");

  Rng rng = make_stream(cfg.seed, 0);
  std::vector<std::vector<double>> values(edges.size(), std::vector<double>(cfg.chains));
  for (std::size_t d = 0; d < cfg.chains; ++d) {
    const Vector x = sample_tree_prior(tree, phi0, {edge}, rng);
    for (std::size_t e = 0; e < edges.size(); ++e)
      values[e][d] = x[edges[e].second] - x[edges[e].first];
  }
  ctx.phase("sample");

  CsvWriter csv(ctx.artifact("edge_w1.csv"), "edge,parent,child,w1,floor");
  if (!edges.empty()) {
    const GridDensity truth = ground_truth_marginal(MarginalClass::factor, edge);
    Rng floor_rng = make_stream(cfg.seed, 1);
    const double floor = noise_floor(truth, cfg.chains, cfg.floor_replicates, floor_rng);
    for (std::size_t e = 0; e < edges.size(); ++e)
      csv.row(e, edges[e].first, edges[e].second, wasserstein1(values[e], truth), floor);
  }
  ctx.phase("analysis");
}

} // namespace

std::string_view to_string(ExperimentKind k) {
  for (auto [kind, name] : kKindNames)
    if (kind == k)
      return name;
  return "unknown";
}

std::string_view to_string(SamplerKind k) {
  switch (k) {
  case SamplerKind::gibbs: return "gibbs";
  case SamplerKind::mala: return "mala";
  case SamplerKind::direct: return "direct";
  }
  return "unknown";
}

Factor parse_factor(const json &spec) {
  require(spec.is_object(), "factor spec must be an object");
  const auto family = get_req<std::string>(spec, "family");
  if (family == "normal") {
    check_keys(spec, {"family", "mean", "variance"}, "normal factor");
    return Factor::normal(get_or<double>(spec, "mean", 0.0), get_or<double>(spec, "variance", 1.0));
  }
  if (family == "laplace") {
    check_keys(spec, {"family", "b"}, "laplace factor");
    return Factor::laplace(get_or<double>(spec, "b", 1.0));
  }
  if (family == "student-t") {
    check_keys(spec, {"family", "nu"}, "student-t factor");
    return Factor::student_t(get_req<double>(spec, "nu"));
  }
  if (family == "sym-gamma") {
    check_keys(spec, {"family", "alpha", "beta"}, "sym-gamma factor");
    return Factor::sym_gamma(get_req<double>(spec, "alpha"), get_req<double>(spec, "beta"));
  }
  if (family == "gmm") {
    check_keys(spec, {"family", "weights", "means", "variances"}, "gmm factor");
    return Factor::gmm(get_req<std::vector<double>>(spec, "weights"),
                       get_req<std::vector<double>>(spec, "means"),
                       get_req<std::vector<double>>(spec, "variances"));
  }
  if (family == "gsm-laplace" || family == "uniform-means-laplace") {
    check_keys(spec, {"family", "b", "components"}, family + " factor");
    const double b = get_or<double>(spec, "b", 1.0);
    const auto l = get_req<std::size_t>(spec, "components");
    return family == "gsm-laplace" ? gsm_discretize_laplace(b, l)
                                   : uniform_means_laplace_gmm(b, l);
  }
  fail(ErrorCode::invalid_argument, "unknown factor family '" + family + "'");
}

json factor_to_json(const Factor &f) {
  switch (f.family()) {
  case Family::normal: {
    const auto &p = f.as<NormalFactor>();
    return {{"family", "normal"}, {"mean", p.mean}, {"variance", p.variance}};
  }
  case Family::laplace:
    return {{"family", "laplace"}, {"b", f.as<LaplaceFactor>().b}};
  case Family::student_t:
    return {{"family", "student-t"}, {"nu", f.as<StudentTFactor>().nu}};
  case Family::sym_gamma: {
    const auto &p = f.as<SymGammaFactor>();
    return {{"family", "sym-gamma"}, {"alpha", p.alpha}, {"beta", p.beta}};
  }
  case Family::gmm: {
    const auto &p = f.as<GmmFactor>();
    return {{"family", "gmm"}, {"weights", p.weights}, {"means", p.means},
            {"variances", p.variances}};
  }
  }
  return {};
}

ExperimentConfig parse_config(const json &j) {
  check_keys(j, {"experiment", "sampler", "chains", "iterations", "seed", "threads", "output",
                 "model", "analysis"},
             "config");
  ExperimentConfig cfg;
  cfg.kind = parse_kind(get_req<std::string>(j, "experiment"));
  cfg.chains = get_or<std::size_t>(j, "chains", cfg.chains);
  cfg.iterations = get_or<std::size_t>(j, "iterations", cfg.iterations);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.threads = get_or<unsigned>(j, "threads", cfg.threads);
  cfg.output = get_or<std::string>(j, "output", cfg.output);
  cfg.model = get_or<json>(j, "model", json::object());
  if (j.contains("sampler")) {
    const json &s = j.at("sampler");
    check_keys(s, {"kind", "cg_tolerance", "cg_max_iterations", "preconditioner", "mala_step",
                   "mala_target", "mala_tune_iterations"},
               "sampler");
    SamplerSpec &sp = cfg.sampler;
    sp.kind = parse_sampler(get_or<std::string>(s, "kind", "gibbs"));
    sp.cg.tolerance = get_or<double>(s, "cg_tolerance", sp.cg.tolerance);
    sp.cg.max_iterations = get_or<std::size_t>(s, "cg_max_iterations", 0);
    const auto pre = get_or<std::string>(s, "preconditioner", "diagonal");
    require(pre == "diagonal" || pre == "identity", "preconditioner must be diagonal or identity");
    sp.cg.preconditioner =
        pre == "diagonal" ? Preconditioner::normal_eq_diagonal : Preconditioner::identity;
    sp.mala_step = get_or<double>(s, "mala_step", sp.mala_step);
    sp.mala_target = get_or<double>(s, "mala_target", sp.mala_target);
    sp.mala_tune_iterations = get_or<std::size_t>(s, "mala_tune_iterations", sp.mala_tune_iterations);
  }
  if (j.contains("analysis")) {
    const json &a = j.at("analysis");
    check_keys(a, {"floor_replicates", "max_lag", "acf_chains", "memory_budget"}, "analysis");
    cfg.floor_replicates = get_or<std::size_t>(a, "floor_replicates", cfg.floor_replicates);
    cfg.max_lag = get_or<std::size_t>(a, "max_lag", cfg.max_lag);
    cfg.acf_chains = get_or<std::size_t>(a, "acf_chains", cfg.acf_chains);
    cfg.memory_budget = get_or<std::size_t>(a, "memory_budget", cfg.memory_budget);
  }
  require(cfg.chains >= 1 && cfg.iterations >= 1, "chains and iterations must be positive");
  require(cfg.floor_replicates >= 1, "floor_replicates must be positive");
  require(cfg.sampler.cg.tolerance > 0.0, "cg_tolerance must be positive");
  require(cfg.sampler.mala_step >= 0.0, "mala_step must be nonnegative");
  require(cfg.sampler.mala_target > 0.0 && cfg.sampler.mala_target < 1.0,
          "mala_target must lie in (0, 1)");
  require(cfg.model.is_object(), "model must be an object");
  return cfg;
}

ExperimentConfig load_config(const fs::path &path) {
  std::ifstream is(path);
  if (!is)
    fail(ErrorCode::io_failure, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception &e) {
    fail(ErrorCode::invalid_argument, "config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig &cfg) {
  const SamplerSpec &s = cfg.sampler;
  return {
      {"experiment", to_string(cfg.kind)},
      {"chains", cfg.chains},
      {"iterations", cfg.iterations},
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"output", cfg.output},
      {"model", cfg.model},
      {"sampler",
       {{"kind", to_string(s.kind)},
        {"cg_tolerance", s.cg.tolerance},
        {"cg_max_iterations", s.cg.max_iterations},
        {"preconditioner",
         s.cg.preconditioner == Preconditioner::identity ? "identity" : "diagonal"},
        {"mala_step", s.mala_step},
        {"mala_target", s.mala_target},
        {"mala_tune_iterations", s.mala_tune_iterations}}},
      {"analysis",
       {{"floor_replicates", cfg.floor_replicates},
        {"max_lag", cfg.max_lag},
        {"acf_chains", cfg.acf_chains},
        {"memory_budget", cfg.memory_budget}}},
  };
}

std::string config_hash(const ExperimentConfig &cfg) {
  // The output directory and thread count do not change results.
  json j = config_to_json(cfg);
  j.erase("output");
  j.erase("threads");
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
  return os.str();
}

json manifest_to_json(const Manifest &m) {
  json phases = json::array();
  for (const auto &[name, secs] : m.phases)
    phases.push_back({{"name", name}, {"seconds", secs}});
  json j{{"config_hash", m.config_hash},
         {"version", m.version},
         {"experiment", to_string(m.kind)},
         {"wall_clock_seconds", m.wall_clock},
         {"phases", phases},
         {"artifacts", m.artifacts},
         {"partial", m.partial},
         {"config", m.config}};
  if (!m.error.empty())
    j["error"] = m.error;
  return j;
}

Manifest run_experiment(const ExperimentConfig &cfg) {
  Manifest manifest;
  manifest.kind = cfg.kind;
  manifest.config = config_to_json(cfg);
  manifest.config_hash = config_hash(cfg);
  const fs::path dir(cfg.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    fail(ErrorCode::io_failure, "cannot create " + dir.string() + ": " + ec.message());

  const auto start = std::chrono::steady_clock::now();
  Context ctx{cfg, manifest, dir};
  auto write_manifest = [&] {
    manifest.wall_clock =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream os(dir / "manifest.json");
    os << manifest_to_json(manifest).dump(2) << '\n';
    if (!os)
      fail(ErrorCode::io_failure, "cannot write manifest in " + dir.string());
  };
  try {
    switch (cfg.kind) {
    case ExperimentKind::baseline_topology:
    case ExperimentKind::init_sensitivity:
    case ExperimentKind::gmm_parametrization:
      run_baseline_family(ctx);
      break;
    case ExperimentKind::image_prior:
      run_image_prior(ctx);
      break;
    case ExperimentKind::posterior_denoise:
      run_posterior(ctx, false);
      break;
    case ExperimentKind::posterior_dct:
      run_posterior(ctx, true);
      break;
    case ExperimentKind::tree_direct:
      run_tree_direct(ctx);
      break;
    }
  } catch (const Error &e) {
    manifest.partial = true;
    manifest.error = std::string(to_string(e.code())) + ": " + e.what();
    write_manifest();
    throw Error(e.code(), std::string(to_string(cfg.kind)) + ": " + e.what());
  } catch (const json::exception &e) {
    manifest.partial = true;
    manifest.error = std::string("invalid-argument: ") + e.what();
    write_manifest();
    throw Error(ErrorCode::invalid_argument, std::string(to_string(cfg.kind)) + ": " + e.what());
  }
  write_manifest();
  return manifest;
}

Vector constant_init(Index n, double norm) {
  require(n >= 1, "constant_init: empty state");
  return Vector::Constant(n, norm / std::sqrt(static_cast<double>(n)));
}

RecorderSpec baseline_recorder(const Baseline &b) {
  RecorderSpec rec;
  for (const auto &set : b.marginals)
    for (const auto &v : set.functionals)
      rec.functionals.push_back(v);
  return rec;
}

SampleStore run_sampler(const GlmModel &model, const Vector &x0, const SamplerSpec &spec,
                        const RunOptions &opts, const RecorderSpec &recorder, double *step_used,
                        double *accept_rate) {
  switch (spec.kind) {
  case SamplerKind::gibbs:
    if (accept_rate)
      *accept_rate = 1.0;
    return run_chains(model, x0, spec.cg, opts, recorder);
  case SamplerKind::mala: {
    double step = spec.mala_step;
    if (step <= 0.0)
      step = tune_step_size(model, x0, spec.mala_target, spec.mala_tune_iterations,
                            opts.seed ^ 0x6d616c61ull);
    MalaRun run = run_mala_chains(model, x0, MalaConfig{step, true}, opts, recorder);
    if (step_used)
      *step_used = step;
    if (accept_rate)
      *accept_rate = run.accept_rate;
    return std::move(run.samples);
  }
  case SamplerKind::direct:
    break;
  }
  fail(ErrorCode::invalid_argument, "run_sampler: the direct sampler has no chains");
}

std::vector<double> pooled_values(const SampleStore &store, std::size_t first,
                                  std::size_t count, std::size_t iter) {
  std::vector<double> out;
  out.reserve(count * store.chains);
  for (std::size_t k = first; k < first + count; ++k) {
    const auto &v = store.values[k];
    const auto begin = v.begin() + static_cast<std::ptrdiff_t>(iter * store.chains);
    out.insert(out.end(), begin, begin + static_cast<std::ptrdiff_t>(store.chains));
  }
  return out;
}

std::vector<MarginalCurve> baseline_curves(const Baseline &b, const Factor &phi,
                                           const SampleStore &store,
                                           std::size_t floor_replicates, std::uint64_t seed) {
  std::vector<MarginalCurve> out;
  std::size_t first = 0;
  Rng rng = make_stream(seed, 0x666c6f6fULL);
  for (const auto &set : b.marginals) {
    MarginalCurve c{set.cls, {}, 0.0, first, set.functionals.size()};
    const GridDensity truth = ground_truth_marginal(set.cls, phi);
    c.w1.reserve(store.iterations);
    for (std::size_t it = 0; it < store.iterations; ++it)
      c.w1.push_back(wasserstein1(pooled_values(store, first, c.functional_count, it), truth));
    c.floor = noise_floor(truth, c.functional_count * store.chains, floor_replicates, rng);
    first += c.functional_count;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::vector<double>> second_half_acfs(const SampleStore &store, std::size_t k,
                                                  std::size_t max_lag, std::size_t max_chains) {
  const std::size_t chains = std::min(store.chains, max_chains);
  std::vector<std::vector<double>> out;
  out.reserve(chains);
  for (std::size_t c = 0; c < chains; ++c)
    out.push_back(acf(store.trajectory(k, c, store.iterations / 2), max_lag));
  return out;
}

std::vector<double> efficiencies(const std::vector<std::vector<double>> &acfs,
                                 double threshold) {
  std::vector<double> out;
  out.reserve(acfs.size());
  for (const auto &a : acfs)
    out.push_back(sampling_efficiency(a, threshold));
  return out;
}

Vector synthetic_image(Index height, Index width) {
  Vector img = Vector::Constant(height * width, 0.2);
  for (Index i = 0; i < height; ++i)
    for (Index j = 0; j < width; ++j) {
      double v = 0.2;
      if (i >= height / 6 && i < height / 2 && j >= width / 6 && j < width / 2)
        v = 0.8;
      else if (i >= (2 * height) / 3 && j < width / 2)
        v = 0.55;
      else if (j >= (2 * width) / 3)
        v = 0.3 + 0.4 * static_cast<double>(i) / static_cast<double>(std::max<Index>(height - 1, 1));
      img[i * width + j] = v;
    }
  return img;
}

std::vector<Index> dct_mask(Index height, Index width, Rng &rng) {
  const Index lh = (height + 2) / 3, lw = (width + 2) / 3;
  std::vector<Index> keep, rest;
  for (Index i = 0; i < height; ++i)
    for (Index j = 0; j < width; ++j)
      (i < lh && j < lw ? keep : rest).push_back(i * width + j);
  std::shuffle(rest.begin(), rest.end(), rng);
  const auto drop = static_cast<std::size_t>(std::lround(0.25 * static_cast<double>(rest.size())));
  keep.insert(keep.end(), rest.begin() + static_cast<std::ptrdiff_t>(drop), rest.end());
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<bool> edge_pixels(const Vector &image, Index height, Index width, double threshold) {
  require(image.size() == height * width, "edge_pixels: size mismatch");
  std::vector<bool> out(static_cast<std::size_t>(image.size()), false);
  for (Index i = 0; i < height; ++i)
    for (Index j = 0; j < width; ++j) {
      const double v = image[i * width + j];
      auto differs = [&](Index a, Index b) {
        return std::abs(image[a * width + b] - v) > threshold;
      };
      const bool e = (i > 0 && differs(i - 1, j)) || (i + 1 < height && differs(i + 1, j)) ||
                     (j > 0 && differs(i, j - 1)) || (j + 1 < width && differs(i, j + 1));
      out[static_cast<std::size_t>(i * width + j)] = e;
    }
  return out;
}

Vector second_eigenvector(Index height, Index width) {
  require(height * width >= 2, "second_eigenvector: need at least two pixels");
  Vector v(height * width);
  const bool along_width = width >= height;
  const double period = static_cast<double>(along_width ? width : height);
  for (Index i = 0; i < height; ++i)
    for (Index j = 0; j < width; ++j)
      v[i * width + j] =
          std::cos(2.0 * std::numbers::pi * static_cast<double>(along_width ? j : i) / period);
  return v / v.norm();
}

} // namespace latentgibbs
