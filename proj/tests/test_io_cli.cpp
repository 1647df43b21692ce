#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "vocseg/common/rng.hpp"
#include "vocseg/metrics/labelmask.hpp"

// End-to-end checks of the vocseg binary (path via VOCSEG_BIN).

namespace fs = std::filesystem;
using namespace vocseg;

namespace {

std::string binary() {
  const char* env = std::getenv("VOCSEG_BIN");
  REQUIRE_MESSAGE(env != nullptr, "VOCSEG_BIN must point at the vocseg binary");
  return env;
}

int run(const std::string& args, std::string* output = nullptr) {
  const std::string out_file = "/tmp/vocseg_cli_out.txt";
  const int rc = std::system((binary() + " " + args + " > " + out_file + " 2>&1").c_str());
  if (output) {
    std::ifstream is(out_file);
    output->assign((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  }
  return WEXITSTATUS(rc);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("help enumerates every subcommand") {
  std::string out;
  run("--help", &out);
  for (const char* sub :
       {"generate-data", "train", "eval", "ablate", "metrics", "verify"})
    CHECK(out.find(sub) != std::string::npos);
}

TEST_CASE("generate-data: counts, reproducible checksums, precondition surfacing") {
  TempDir d1("vocseg_cli_gen1"), d2("vocseg_cli_gen2");
  std::string out;
  int rc = run("generate-data --speakers 3 --frames-per-speaker 4 --augment 2 --seed 9 --out " +
                   d1.path.string(),
               &out);
  CHECK(rc == 0);
  CHECK(out.find("wrote 36 samples") != std::string::npos);  // 3*4*3
  CHECK(out.find("class pixel frequencies") != std::string::npos);

  rc = run("generate-data --speakers 3 --frames-per-speaker 4 --augment 2 --seed 9 --out " +
           d2.path.string());
  CHECK(rc == 0);
  for (const auto& e : fs::directory_iterator(d1.path))
    CHECK(slurp(e.path()) == slurp(d2.path / e.path().filename()));

  // 2 speakers generate fine but ablate on them must fail (needs >= 3)
  TempDir d3("vocseg_cli_gen3");
  rc = run("generate-data --speakers 2 --frames-per-speaker 4 --seed 9 --out " +
           d3.path.string());
  CHECK(rc == 0);
  rc = run("ablate --data " + d3.path.string() + " --configs imageonly --seeds 1 --epochs 0 " +
               "--out " + d3.path.string() + "/ab",
           &out);
  CHECK(rc == 2);
  CHECK(out.find("3 speakers") != std::string::npos);
}

TEST_CASE("missing dataset path exits with code 2") {
  std::string out;
  const int rc = run("train --data /nonexistent/nowhere --out /tmp/x", &out);
  CHECK(rc == 2);
  CHECK(out.find("manifest.json") != std::string::npos);
}

TEST_CASE("metrics subcommand: identity, spacing override, unmatched files") {
  TempDir pred("vocseg_cli_pred"), truth("vocseg_cli_truth"), outd("vocseg_cli_mout");
  rng::Stream st(3);
  for (int f = 0; f < 3; ++f) {
    metrics::LabelMask m = metrics::LabelMask::filled(16, 16, 0, 1.2);
    for (int y = 4; y < 10; ++y)
      for (int x = 4; x < 10 + f; ++x) m.at(x, y) = 1;
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.vstn", f);
    metrics::save_mask((pred.path / name).string(), m, {"bg", "fg"});
    metrics::save_mask((truth.path / name).string(), m, {"bg", "fg"});
  }

  std::string out;
  int rc = run("metrics --pred " + pred.path.string() + " --truth " + truth.path.string() +
                   " --out " + outd.path.string(),
               &out);
  CHECK(rc == 0);
  CHECK(fs::exists(outd.path / "metrics_per_frame.csv"));
  CHECK(fs::exists(outd.path / "metrics_summary.md"));
  CHECK(out.find("1.00 ± 0.00") != std::string::npos);  // identical masks: dice 1

  // doubling spacing doubles distances: compare per-frame CSVs on a
  // perturbed prediction
  metrics::LabelMask t = metrics::load_mask((truth.path / "frame_000.vstn").string());
  metrics::LabelMask p = t;
  p.at(4, 4) = 0;
  metrics::save_mask((pred.path / "frame_000.vstn").string(), p, {"bg", "fg"});
  std::string csv_a, csv_b;
  run("metrics --pred " + pred.path.string() + " --truth " + truth.path.string() +
      " --spacing 1.2 --out " + outd.path.string());
  csv_a = slurp(outd.path / "metrics_per_frame.csv");
  run("metrics --pred " + pred.path.string() + " --truth " + truth.path.string() +
      " --spacing 2.4 --out " + outd.path.string());
  csv_b = slurp(outd.path / "metrics_per_frame.csv");
  CHECK(csv_a != csv_b);

  fs::remove(truth.path / "frame_002.vstn");
  fs::remove(truth.path / "frame_002.vstn.json");
  rc = run("metrics --pred " + pred.path.string() + " --truth " + truth.path.string() +
               " --out " + outd.path.string(),
           &out);
  CHECK(rc == 2);
  CHECK(out.find("unmatched") != std::string::npos);
  CHECK(out.find("frame_002") != std::string::npos);
}

TEST_CASE("verify subcommand: losses suite passes, unknown suite rejected") {
  std::string out;
  const int rc = run("verify losses", &out);
  CHECK(rc == 0);
  CHECK(out.find("[PASS]") != std::string::npos);
  CHECK(out.find("[FAIL]") == std::string::npos);
  CHECK(run("verify bogus", &out) == 2);
}

TEST_CASE("tiny train -> eval round trip through the CLI") {
  TempDir ds("vocseg_cli_ds"), outd("vocseg_cli_train");
  int rc = run("generate-data --speakers 3 --frames-per-speaker 8 --seed 4 --out " +
               ds.path.string());
  REQUIRE(rc == 0);

  // strict config file: an unknown key is rejected with its path
  const std::string bad = (ds.path / "bad.json").string();
  std::ofstream(bad) << R"({"train": {"lr": 0.1}})";
  std::string out;
  rc = run("train --config " + bad + " --data " + ds.path.string(), &out);
  CHECK(rc == 2);
  CHECK(out.find("train.lr") != std::string::npos);

  const std::string cfg = (ds.path / "cfg.json").string();
  std::ofstream(cfg) << R"({
    "model": {"image_size": 32, "patch_size": 8, "d_model": 32, "n_heads": 4,
               "n_encoder_layers": 1, "n_decoder_layers": 1},
    "train": {"max_epochs": 1, "batch_size": 4, "learning_rate": 0.001, "seed": 5}
  })";
  rc = run("train --config " + cfg + " --data " + ds.path.string() + " --fold 0 --out " +
               outd.path.string(),
           &out);
  REQUIRE_MESSAGE(rc == 0, out);
  CHECK(fs::exists(outd.path / "checkpoint.bin"));
  CHECK(fs::exists(outd.path / "train.log.csv"));
  CHECK(fs::exists(outd.path / "resolved_config.json"));
  CHECK(slurp(outd.path / "train.log.csv").find("step,ce,dice") == 0);

  rc = run("eval --checkpoint " + (outd.path / "checkpoint.bin").string() + " --data " +
               ds.path.string() + " --fold 0 --out " + outd.path.string() + "/eval",
           &out);
  REQUIRE_MESSAGE(rc == 0, out);
  CHECK(fs::exists(outd.path / "eval" / "eval_per_frame.csv"));

  rc = run("eval --video-only --checkpoint " + (outd.path / "checkpoint.bin").string() +
               " --data " + ds.path.string() + " --fold 0 --out " + outd.path.string() +
               "/eval_vo",
           &out);
  REQUIRE_MESSAGE(rc == 0, out);
  CHECK(out.find("video-only") != std::string::npos);
}
