// tests/test_metrics.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "codemark/metrics.hpp"
#include "codemark/train.hpp"

using namespace codemark;

namespace {

codec::ModelsConfig small_config() {
  codec::ModelsConfig cfg;
  cfg.vq.codebook_size = 16;
  cfg.vq.code_dim = 8;
  cfg.vq.hidden = 10;
  cfg.manip.codebook_size = 16;
  cfg.manip.dim = 16;
  cfg.manip.layers = 1;
  cfg.manip.heads = 2;
  cfg.manip.filter = 32;
  cfg.manip.kernel = 3;
  return cfg;
}

audio::Waveform tone(double freq, double seconds, uint64_t seed) {
  Rng rng(seed);
  audio::Waveform w;
  w.sample_rate = 24000;
  const int n = static_cast<int>(seconds * 24000);
  w.samples.resize(n);
  for (int i = 0; i < n; ++i)
    w.samples[i] = 0.4 * std::sin(2.0 * 3.14159265 * freq * i / 24000.0) + 0.02 * rng.normal();
  return w;
}

}  // namespace

TEST_CASE("ber basics") {
  CHECK(metrics::ber({1, 0, 1}, {1, 0, 1}) == 0.0);
  CHECK(metrics::ber({1, 0, 1}, {0, 1, 0}) == 1.0);
  std::vector<int> a(32, 0), b(32, 0);
  b[7] = 1;
  CHECK(metrics::ber(a, b) == doctest::Approx(0.03125));
  CHECK_THROWS_AS(metrics::ber({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(metrics::ber({1}, {1, 0}), std::invalid_argument);
}

TEST_CASE("ber symmetry and triangle bound on random triples") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 8 + static_cast<int>(rng.uniform_int(64));
    std::vector<int> a(n), b(n), c(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.bernoulli(0.5);
      b[i] = rng.bernoulli(0.5);
      c[i] = rng.bernoulli(0.5);
    }
    CHECK(metrics::ber(a, b) == metrics::ber(b, a));
    CHECK(metrics::ber(a, c) <= metrics::ber(a, b) + metrics::ber(b, c) + 1e-12);
  }
}

TEST_CASE("aligned ber counts missing positions as errors") {
  CHECK(metrics::ber_aligned({1, 0, 1, 1}, {1, 0}) == doctest::Approx(0.5));
  CHECK(metrics::ber_aligned({1, 0}, {1, 0, 1, 1}) == 0.0);  // extras truncated
  CHECK(metrics::ber_aligned({1, 1}, {}) == 1.0);
}

TEST_CASE("snr closed forms") {
  const audio::Waveform w = tone(300.0, 0.3, 2);
  audio::Waveform scaled = w;
  for (double& s : scaled.samples) s *= 0.9;
  CHECK(metrics::snr_db(w, scaled) == doctest::Approx(20.0).epsilon(1e-9));

  audio::Waveform negated = w;
  for (double& s : negated.samples) s = -s;
  CHECK(metrics::snr_db(w, negated) == doctest::Approx(-10.0 * std::log10(4.0)).epsilon(1e-9));

  CHECK(metrics::snr_db(w, w) == metrics::kSnrCapDb);
}

TEST_CASE("snr matches the closed form for constructed noise") {
  const audio::Waveform w = tone(500.0, 0.4, 3);
  Rng rng(4);
  audio::Waveform noisy = w;
  double sig = 0.0, err = 0.0;
  std::vector<double> noise(w.length());
  for (int i = 0; i < w.length(); ++i) {
    noise[i] = 0.01 * rng.normal();
    noisy.samples[i] += noise[i];
    sig += w.samples[i] * w.samples[i];
    err += noise[i] * noise[i];
  }
  const double expected = 10.0 * std::log10(sig / err);
  CHECK(metrics::snr_db(w, noisy) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("scaling the error by 10 costs exactly 20 dB") {
  const audio::Waveform w = tone(700.0, 0.3, 5);
  Rng rng(6);
  audio::Waveform e1 = w, e10 = w;
  for (int i = 0; i < w.length(); ++i) {
    const double e = 0.001 * rng.normal();
    e1.samples[i] += e;
    e10.samples[i] += 10.0 * e;
  }
  CHECK(metrics::snr_db(w, e1) - metrics::snr_db(w, e10) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("best-of-n candidates nest: the running best never decreases with n") {
  codec::Models models(small_config(), 20);
  models.stage1_trained = true;
  models.stage2_trained = true;
  const audio::Waveform w = tone(220.0, 0.5, 7);
  const std::vector<int> bits = {1, 0, 1, 1, 0, 1};
  const uint64_t seed = 31;
  const auto r10 = metrics::select_positions_best_of_n(models, w, bits, 10, seed);
  REQUIRE(r10.candidate_snrs.size() == 10);
  // prefix property: n = 3 sees exactly the first three candidates
  const auto r3 = metrics::select_positions_best_of_n(models, w, bits, 3, seed);
  for (int i = 0; i < 3; ++i)
    CHECK(r3.candidate_snrs[i] == r10.candidate_snrs[i]);
  // running maximum is monotone in n
  double run_best = -1e9;
  std::vector<double> best_at(10);
  for (int i = 0; i < 10; ++i) {
    run_best = std::max(run_best, r10.candidate_snrs[i]);
    best_at[i] = run_best;
  }
  CHECK(r3.best_snr_db == doctest::Approx(best_at[2]));
  CHECK(r10.best_snr_db == doctest::Approx(best_at[9]));
  for (int i = 1; i < 10; ++i) CHECK(best_at[i] >= best_at[i - 1]);
  // n = 1 is plain embedding with the first candidate seed
  const auto r1 = metrics::select_positions_best_of_n(models, w, bits, 1, seed);
  CHECK(r1.best_snr_db == doctest::Approx(r10.candidate_snrs[0]));
}

TEST_CASE("oracle-mode information hiding eval reports an all-zero BER table") {
  codec::Models models(small_config(), 21);
  models.stage1_trained = true;
  models.stage2_trained = true;
  const std::vector<audio::Waveform> corpus = {tone(200.0, 1.1, 8), tone(330.0, 1.2, 9)};
  metrics::EvalOptions opts;
  opts.payload_bits = 32;
  opts.oracle_codes = true;
  opts.seed = 5;
  const metrics::EvalReport report = metrics::run_information_hiding_eval(models, corpus, opts);
  REQUIRE(!report.ber_by_distortion.empty());
  for (const auto& [kind, value] : report.ber_by_distortion) {
    INFO(kind);
    CHECK(value == 0.0);
  }
  CHECK(report.bps == doctest::Approx(32.0));  // 32 bits in a 1 s segment
  CHECK(report.clips == 2);
}

TEST_CASE("csv and json report surfaces") {
  metrics::EvalReport report;
  report.ber_by_distortion["ND"] = 0.01;
  report.ber_by_distortion["GN"] = 0.05;
  report.snr_db = 31.5;
  report.bps = 32.0;
  const std::string csv = report.ber_table_csv();
  CHECK(csv.find("distortion,ber") != std::string::npos);
  CHECK(csv.find("GN,0.05") != std::string::npos);
  const std::string j = report.to_json();
  CHECK(j.find("\"snr_db\":31.5") != std::string::npos);
}

TEST_CASE("svg plots are written") {
  const std::string path = "/tmp/codemark_test_plot.svg";
  metrics::write_svg_plot(path, "demo", {{0.0, 1.0}, {1.0, 3.0}, {2.0, 2.0}}, "x", "y");
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("<svg") != std::string::npos);
  CHECK(text.find("polyline") != std::string::npos);
  std::remove(path.c_str());
}
