// tests/test_cli.cpp
// Exercises the installed binary: exit codes, file outputs, determinism.
// argv[1] is the CLI path (wired up by CMake).
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "codemark/audio.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;
const std::string kDir = "/tmp/codemark_cli_test";

int run_cli(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " >> " + kDir + "/cli.log 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("missing checkpoints exit with code 2") {
  CHECK(run_cli("ztest --checkpoint " + kDir + "/nope.ckpt --in " + kDir + "/x.wav") == 2);
  CHECK(run_cli("detect --checkpoint " + kDir + "/nope.ckpt --in " + kDir + "/x.wav") == 2);
  CHECK(run_cli("train --stage 2 --corpus " + kDir + "/corpus --checkpoint " + kDir +
                "/nope.ckpt") == 2);
}

TEST_CASE("corpus generation, tiny two-stage training, determinism of the metrics record") {
  CHECK(run_cli("make-corpus --out " + kDir + "/corpus --clips 3 --seconds 0.6 --seed 5") == 0);
  int wavs = 0;
  for (const auto& e : fs::directory_iterator(kDir + "/corpus"))
    wavs += e.path().extension() == ".wav";
  CHECK(wavs == 3);

  std::ofstream cfg(kDir + "/train.json");
  cfg << R"({"stage1_steps": 4, "stage2_steps": 4, "batch_size": 1, "clip_seconds": 0.15,
             "peak_lr": 0.001, "warmup_steps": 4, "log_every": 1, "seed": 77,
             "catalog": ["NONE"], "log_path": ")"
      << kDir << R"(/train.ldjson"})";
  cfg.close();

  const std::string train1 = "train --stage 1 --config " + kDir + "/train.json --corpus " +
                             kDir + "/corpus --checkpoint " + kDir +
                             "/a.ckpt --codebook-size 16 --code-dim 8 --hidden 10 "
                             "--metrics-out " + kDir + "/m1.json";
  CHECK(run_cli(train1) == 0);
  CHECK(fs::exists(kDir + "/a.ckpt"));
  CHECK(fs::exists(kDir + "/train.ldjson"));

  // identical config + seed -> identical final metrics record
  const std::string train1b = "train --stage 1 --config " + kDir + "/train.json --corpus " +
                              kDir + "/corpus --checkpoint " + kDir +
                              "/b.ckpt --codebook-size 16 --code-dim 8 --hidden 10 "
                              "--metrics-out " + kDir + "/m2.json";
  CHECK(run_cli(train1b) == 0);
  CHECK(slurp(kDir + "/m1.json") == slurp(kDir + "/m2.json"));
  CHECK(slurp(kDir + "/m1.json").find("\"stage\":1") != std::string::npos);

  CHECK(run_cli("train --stage 2 --config " + kDir + "/train.json --corpus " + kDir +
                "/corpus --checkpoint " + kDir + "/a.ckpt") == 0);
}

TEST_CASE("embed, detect, ztest and the capacity exit code") {
  const std::string wav = kDir + "/carrier.wav";
  {
    codemark::audio::Waveform w;
    w.sample_rate = 24000;
    w.samples.resize(12000);
    for (int i = 0; i < 12000; ++i)
      w.samples[i] = 0.3 * std::sin(2.0 * 3.14159265 * 330.0 * i / 24000.0);
    codemark::audio::write_wav(wav, w);
  }
  const std::string ckpt = kDir + "/a.ckpt";
  CHECK(run_cli("embed --checkpoint " + ckpt + " --in " + wav + " --out " + kDir +
                "/wm.wav --bits 0xDEAD --seed 3 --plan " + kDir + "/plan.json") == 0);
  CHECK(fs::exists(kDir + "/wm.wav"));
  CHECK(slurp(kDir + "/plan.json").find("\"positions\"") != std::string::npos);

  CHECK(run_cli("detect --checkpoint " + ckpt + " --in " + kDir +
                "/wm.wav --expected-length 16 --report " + kDir + "/report.json") == 0);
  CHECK(slurp(kDir + "/report.json").find("\"alignment\"") != std::string::npos);

  CHECK(run_cli("ztest --checkpoint " + ckpt + " --in " + wav) == 0);

  // 12000 samples -> 150 frames -> capacity 75 bits; ask for 80
  std::string many(80, '1');
  CHECK(run_cli("embed --checkpoint " + ckpt + " --in " + wav + " --out " + kDir +
                "/wm2.wav --bits " + many) == 3);
}

TEST_CASE("attack subcommand: AS is 0.9x within 16-bit quantization") {
  const std::string in_wav = kDir + "/carrier.wav";
  CHECK(run_cli("attack --in " + in_wav + " --out " + kDir + "/as.wav --kind AS") == 0);
  const auto a = codemark::audio::read_wav(in_wav);
  const auto b = codemark::audio::read_wav(kDir + "/as.wav");
  REQUIRE(a.length() == b.length());
  for (int i = 0; i < a.length(); i += 7)
    CHECK(std::abs(b.samples[i] - 0.9 * a.samples[i]) <= 0.5 / 32768.0 + 1e-12);

  CHECK(run_cli("attack --in " + in_wav + " --out " + kDir + "/x.wav --kind BOGUS") == 1);
}

TEST_CASE("generic errors exit with code 1") {
  CHECK(run_cli("attack --in " + kDir + "/does_not_exist.wav --out " + kDir + "/y.wav") == 1);
}

int main(int argc, char** argv) {
  if (argc > 1) g_cli = argv[1];
  fs::remove_all(kDir);
  fs::create_directories(kDir);
  doctest::Context ctx;
  ctx.applyCommandLine(1, argv);
  const int rc = ctx.run();
  fs::remove_all(kDir);
  return rc;
}
