#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cli.hpp"
#include "fanet/error.hpp"
#include "fanet/gate.hpp"
#include "fanet/synth.hpp"
#include "fanet/text_io.hpp"

#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;
using fanet::cli::run_cli;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  args.insert(args.begin(), "--quiet");
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fanet_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const fs::path demo = FANET_DEMO_DIR;

std::vector<std::string> synth_args(const fs::path& out, const std::string& seed) {
  return {"synth",  "--genuine", (demo / "genuine").string(), "--backgrounds", (demo / "backgrounds").string(),
          "--n",    "40",        "--seed",                    seed,            "--out",
          out.string()};
}

std::size_t count_rows(const std::string& text, char skip_prefix) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != skip_prefix) ++n;
  return n;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"bogus"}).code == 1);
  CHECK(run({"synth", "--n", "5"}).code == 1);
  CHECK(run({"gate", "--scores", "x", "--out", "y", "--tf", "half"}).code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("exit codes by error kind") {
  CHECK(fanet::cli::exit_code(fanet::ErrorKind::Numerical) == 3);
  CHECK(fanet::cli::exit_code(fanet::ErrorKind::Format) == 2);
  CHECK(fanet::cli::exit_code(fanet::ErrorKind::Dependency) == 2);
}

TEST_CASE("synth with a missing directory fails without output") {
  const fs::path dir = scratch("missing");
  auto args = synth_args(dir / "corpus", "7");
  args[2] = (dir / "nope").string();
  const Result r = run(args);
  CHECK(r.code == 2);
  CHECK(r.err.find("nope") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "corpus"));
  CHECK_FALSE(fs::exists(dir / "corpus.partial"));
}

TEST_CASE("synth: 40 spoof rows, identical manifests for the same seed") {
  const fs::path dir = scratch("synth");
  REQUIRE(run(synth_args(dir / "a", "7")).code == 0);
  REQUIRE(run(synth_args(dir / "b", "7")).code == 0);
  REQUIRE(run(synth_args(dir / "c", "8")).code == 0);
  const std::string a = fanet::read_file(dir / "a" / "manifest.tsv");
  CHECK(a == fanet::read_file(dir / "b" / "manifest.tsv"));
  CHECK(fanet::read_file(dir / "a" / "run.json") == fanet::read_file(dir / "b" / "run.json"));
  CHECK(a != fanet::read_file(dir / "c" / "manifest.tsv"));
  std::size_t spoof = 0;
  for (const auto& e : fanet::synth::parse_manifest(a, "manifest")) spoof += e.label == 0;
  CHECK(spoof == 40);
}

TEST_CASE("pipeline stages chain, gate, evaluate and detect missing or stale inputs") {
  const fs::path dir = scratch("pipeline");
  const std::string corpus = (dir / "corpus").string(), ext = (dir / "ext.ckpt").string(),
                    feat = (dir / "features.tsv").string(), sup = (dir / "sup.tsv").string(),
                    model = (dir / "model.ckpt").string(), scores = (dir / "scores.tsv").string();
  REQUIRE(run(synth_args(corpus, "3")).code == 0);
  REQUIRE(run({"train-extractor", "--corpus", corpus, "--out", ext, "--epochs", "8", "--input-size", "64", "--hidden",
               "64"})
              .code == 0);
  REQUIRE(run({"extract", "--corpus", corpus, "--extractor", ext, "--out", feat, "--format", "binary"}).code == 0);
  REQUIRE(run({"supervise", "--corpus", corpus, "--features", feat, "--extractor", ext, "--out", sup, "--head-epochs",
               "50"})
              .code == 0);
  REQUIRE(run({"train", "--features", feat, "--scores", sup, "--out", model, "--epochs", "5"}).code == 0);
  REQUIRE(run({"score", "--features", feat, "--model", model, "--out", scores}).code == 0);

  const auto entries = fanet::synth::parse_manifest(fanet::read_file(dir / "corpus" / "manifest.tsv"), "m");
  CHECK(count_rows(fanet::read_file(scores), 'i') == entries.size());
  for (const char* a : {"ext.ckpt", "features.tsv", "sup.tsv", "model.ckpt", "scores.tsv"})
    CHECK(fs::exists(dir / (std::string(a) + ".run.json")));

  SUBCASE("gate by fraction, threshold and calibration") {
    const std::string g = (dir / "gate.tsv").string();
    REQUIRE(run({"gate", "--scores", scores, "--tf", "0.25", "--out", g}).code == 0);
    const std::string text = fanet::read_file(g);
    std::size_t rejected = 0, pos = 0;
    while ((pos = text.find("\treject\n", pos)) != std::string::npos) ++rejected, ++pos;
    CHECK(rejected == entries.size() / 4);
    CHECK(run({"gate", "--scores", scores, "--threshold", "-1", "--out", g}).code == 0);
    CHECK(fanet::read_file(g).find("\treject\n") == std::string::npos);
    CHECK(run({"gate", "--scores", scores, "--tf", "0.25", "--calibrate-on", scores, "--out", g}).code == 0);
    CHECK(run({"gate", "--scores", scores, "--out", g}).code == 2);
  }

  SUBCASE("eval emits one report per threshold") {
    const fs::path out = dir / "eval";
    const Result r = run({"eval", "--corpus", corpus, "--features", feat, "--model", model, "--extractor", ext, "--tf",
                          "0,0.1,0.2,0.3", "--out", out.string()});
    REQUIRE(r.code == 0);
    for (const char* t : {"0.00", "0.10", "0.20", "0.30"}) {
      const fs::path p = out / ("report_tf" + std::string(t) + ".tsv");
      REQUIRE(fs::exists(p));
      const auto rep = fanet::gate::parse_report_tsv(fanet::read_file(p), p.string());
      CHECK(rep.gate.t_f == doctest::Approx(std::stod(t)));
    }
    CHECK(fs::exists(out / "summary.txt"));
    CHECK(fs::exists(out / "plot.tsv"));
    CHECK(r.out == fanet::read_file(out / "summary.txt"));
  }

  SUBCASE("a missing upstream artifact is named") {
    const Result r = run({"score", "--features", feat, "--model", (dir / "absent.ckpt").string(), "--out", scores});
    CHECK(r.code == 2);
    CHECK(r.err.find("absent.ckpt") != std::string::npos);
  }

  SUBCASE("features from a different corpus make the supervision stale") {
    REQUIRE(run(synth_args((dir / "other").string(), "4")).code == 0);
    const std::string other_feat = (dir / "other.tsv").string();
    REQUIRE(run({"extract", "--corpus", (dir / "other").string(), "--extractor", ext, "--out", other_feat}).code == 0);
    const Result r = run({"train", "--features", other_feat, "--scores", sup, "--out", model});
    CHECK(r.code == 2);
    CHECK(r.err.find("stale") != std::string::npos);
  }

  SUBCASE("config file supplies options, flags override it") {
    const fs::path cfg = dir / "fanet.toml";
    fanet::write_file_atomic(cfg, "[gate]\ntf = 0.5\n");
    const std::string g = (dir / "gate_cfg.tsv").string();
    REQUIRE(run({"--config", cfg.string(), "gate", "--scores", scores, "--out", g}).code == 0);
    CHECK(count_rows(fanet::read_file(g), 'i') == entries.size());
    const std::string half = fanet::read_file(g);
    REQUIRE(run({"--config", cfg.string(), "gate", "--scores", scores, "--out", g, "--tf", "0"}).code == 0);
    CHECK(fanet::read_file(g) != half);
    CHECK(fanet::read_file(g).find("\treject\n") == std::string::npos);
  }
}
