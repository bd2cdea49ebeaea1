#include <doctest.h>

#include "latentgibbs/error.hpp"
#include "latentgibbs/experiment.hpp"
#include "latentgibbs/pgm.hpp"

#include <fstream>
#include <sstream>

using namespace latentgibbs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("latentgibbs_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ErrorCode code_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::io_failure;
}

} // namespace

TEST_CASE("pgm: constant image, round trip and std scaling") {
  const fs::path dir = scratch("pgm");
  fs::create_directories(dir);

  const PgmImage flat = quantize_pgm(Vector::Constant(6, 0.37), 2, 3, PgmMapping::affine);
  CHECK(std::all_of(flat.pixels.begin(), flat.pixels.end(),
                    [&](auto p) { return p == flat.pixels[0]; }));

  Vector img(6);
  img << -1.0, 0.0, 0.25, 0.5, 1.0, 2.0;
  const PgmImage q = quantize_pgm(img, 2, 3, PgmMapping::clip01);
  CHECK(q.pixels == std::vector<std::uint16_t>{0, 0, 16384, 32768, 65535, 65535});
  write_pgm(q, dir / "a.pgm");
  const PgmImage back = read_pgm(dir / "a.pgm");
  CHECK(back.height == 2);
  CHECK(back.width == 3);
  CHECK(back.pixels == q.pixels);
  CHECK(slurp(dir / "a.pgm").rfind("P5\n3 2\n65535\n", 0) == 0);

  Vector sd(2);
  sd << 0.004, 0.02;
  const PgmImage s = quantize_pgm(sd, 1, 2, PgmMapping::clip01, 100.0);
  CHECK(s.pixels[0] == 26214);
  CHECK(s.pixels[1] == 65535);

  const PgmImage ramp = quantize_pgm(img, 2, 3, PgmMapping::affine);
  CHECK(ramp.pixels.front() == 0);
  CHECK(ramp.pixels.back() == 65535);

  Vector bad = img;
  bad[2] = std::nan("");
  CHECK(code_of([&] { quantize_pgm(bad, 2, 3, PgmMapping::affine); }) ==
        ErrorCode::invalid_argument);
  CHECK(code_of([&] { read_pgm(dir / "missing.pgm"); }) == ErrorCode::io_failure);
  fs::remove_all(dir);
}

TEST_CASE("config parsing, defaults and hash") {
  const json j = json::parse(R"({
    "experiment": "baseline-topology", "seed": 9, "chains": 10, "iterations": 5,
    "sampler": {"kind": "mala", "mala_step": 0.2},
    "model": {"topology": "loop", "factor": {"family": "laplace", "b": 2}}})");
  const ExperimentConfig cfg = parse_config(j);
  CHECK(cfg.kind == ExperimentKind::baseline_topology);
  CHECK(cfg.sampler.kind == SamplerKind::mala);
  CHECK(cfg.sampler.mala_step == 0.2);
  CHECK(cfg.floor_replicates == 10);
  CHECK(cfg.sampler.cg.tolerance == 1e-8);

  const ExperimentConfig again = parse_config(config_to_json(cfg));
  CHECK(config_hash(again) == config_hash(cfg));
  CHECK(config_hash(cfg).size() == 16);
  ExperimentConfig moved = cfg;
  moved.output = "elsewhere";
  moved.threads = 4;
  CHECK(config_hash(moved) == config_hash(cfg));
  moved.seed = 10;
  CHECK(config_hash(moved) != config_hash(cfg));

  json extra = j;
  extra["chain"] = 3;
  CHECK(code_of([&] { parse_config(extra); }) == ErrorCode::invalid_argument);
  json kind = j;
  kind["experiment"] = "nope";
  CHECK(code_of([&] { parse_config(kind); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { load_config("/nonexistent/config.json"); }) == ErrorCode::io_failure);
}

TEST_CASE("factor specs round-trip") {
  for (const char *text :
       {R"({"family":"normal","mean":1,"variance":2})", R"({"family":"laplace","b":0.5})",
        R"({"family":"student-t","nu":3})", R"({"family":"sym-gamma","alpha":0.75,"beta":2})",
        R"({"family":"gmm","weights":[0.3,0.7],"means":[0,1],"variances":[1,2]})"}) {
    const Factor f = parse_factor(json::parse(text));
    CHECK(parse_factor(factor_to_json(f)).describe() == f.describe());
  }
  CHECK(parse_factor(json::parse(R"({"family":"gsm-laplace","components":16})")).family() ==
        Family::gmm);
  CHECK(code_of([] { parse_factor(json::parse(R"({"family":"laplace","c":1})")); }) ==
        ErrorCode::invalid_argument);
  CHECK(code_of([] { parse_factor(json::parse(R"({"family":"laplace","b":-1})")); }) ==
        ErrorCode::invalid_argument);
}

TEST_CASE("helpers") {
  CHECK(constant_init(4, 6.0).norm() == doctest::Approx(6.0));
  CHECK(constant_init(4, 6.0)[2] == doctest::Approx(3.0));

  const Vector v = second_eigenvector(3, 4);
  CHECK(v.norm() == doctest::Approx(1.0));
  CHECK(std::abs(v.sum()) < 1e-12);

  Rng rng = make_stream(1, 0);
  const auto mask = dct_mask(9, 9, rng);
  // 3x3 block kept, 18 of the other 72 dropped.
  CHECK(mask.size() == 9 + 54);
  CHECK(std::is_sorted(mask.begin(), mask.end()));
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j)
      CHECK(std::binary_search(mask.begin(), mask.end(), i * 9 + j));

  Vector step = Vector::Zero(6);
  step[2] = step[5] = 1.0;
  const auto e = edge_pixels(step, 2, 3);
  CHECK(e == std::vector<bool>{false, true, true, false, true, true});

  const Vector img = synthetic_image(24, 24);
  CHECK(img.minCoeff() >= 0.0);
  CHECK(img.maxCoeff() <= 1.0);
}

TEST_CASE("run_experiment is deterministic and writes a manifest") {
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  json j = json::parse(R"({
    "experiment": "baseline-topology", "seed": 3, "chains": 200, "iterations": 30,
    "model": {"topology": "product", "factor": {"family": "laplace"}}})");
  j["output"] = a.string();
  const Manifest ma = run_experiment(parse_config(j));
  j["output"] = b.string();
  j["threads"] = 2;
  const Manifest mb = run_experiment(parse_config(j));
  CHECK(ma.config_hash == mb.config_hash);
  CHECK_FALSE(ma.artifacts.empty());
  for (const auto &name : ma.artifacts)
    CHECK_MESSAGE(slurp(a / name) == slurp(b / name), name);
  const json m = json::parse(slurp(a / "manifest.json"));
  CHECK(m.at("partial") == false);
  CHECK(m.at("version") == std::string(kVersion));
  CHECK(m.at("phases").size() >= 3);

  json bad = j;
  bad["output"] = a.string();
  bad["model"]["topology"] = "star";
  try {
    run_experiment(parse_config(bad));
    FAIL("expected failure");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
    CHECK(std::string(e.what()).rfind("baseline-topology: ", 0) == 0);
  }
  CHECK(json::parse(slurp(a / "manifest.json")).at("partial") == true);

  json huge = j;
  huge["analysis"] = {{"memory_budget", 100}};
  CHECK(code_of([&] { run_experiment(parse_config(huge)); }) == ErrorCode::size_exceeded);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("tree-direct and posterior pipelines produce their tables") {
  const fs::path dir = scratch("tree");
  json t = json::parse(R"({
    "experiment": "tree-direct", "seed": 1, "chains": 2000, "iterations": 1,
    "sampler": {"kind": "direct"},
    "model": {"parents": [-1, 0, 0, 1], "edge_factor": {"family": "laplace"}}})");
  t["output"] = dir.string();
  run_experiment(parse_config(t));
  std::ifstream is(dir / "edge_w1.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(is, line);
  CHECK(line == "edge,parent,child,w1,floor");
  while (std::getline(is, line))
    ++rows;
  CHECK(rows == 3);

  json p = json::parse(R"({
    "experiment": "posterior-denoise", "seed": 1, "chains": 8, "iterations": 3,
    "model": {"height": 6, "width": 6, "sigma": 0.1,
              "prior": {"factor": {"family": "laplace", "b": 0.1}}}})");
  p["output"] = dir.string();
  const Manifest m = run_experiment(parse_config(p));
  for (const char *f : {"psnr.csv", "std_edges.csv", "instance0_mean.pgm", "instance0_std.pgm",
                        "truth.pgm"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  CHECK(read_pgm(dir / "instance0_mean.pgm").width == 6);
  fs::remove_all(dir);
}
