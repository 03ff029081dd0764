// tests/test_attacks.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "codemark/attacks.hpp"
#include "codemark/errors.hpp"
#include "codemark/metrics.hpp"
#include "codemark/rng.hpp"

using namespace codemark;

namespace {

constexpr double kPi = 3.14159265358979323846;

audio::Waveform tone(double freq, double seconds, int rate, double amp = 0.4) {
  audio::Waveform w;
  w.sample_rate = rate;
  const int n = static_cast<int>(std::llround(seconds * rate));
  w.samples.resize(n);
  for (int i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2.0 * kPi * freq * i / rate);
  return w;
}

audio::Waveform noise_clip(double seconds, int rate, uint64_t seed, double amp = 0.3) {
  Rng rng(seed);
  audio::Waveform w;
  w.sample_rate = rate;
  const int n = static_cast<int>(std::llround(seconds * rate));
  w.samples.resize(n);
  for (int i = 0; i < n; ++i) w.samples[i] = amp * (2.0 * rng.uniform() - 1.0);
  return w;
}

double measured_snr(const audio::Waveform& clean, const audio::Waveform& noisy) {
  double sig = 0.0, err = 0.0;
  for (size_t i = 0; i < clean.samples.size(); ++i) {
    sig += clean.samples[i] * clean.samples[i];
    const double d = clean.samples[i] - noisy.samples[i];
    err += d * d;
  }
  return 10.0 * std::log10(sig / err);
}

}  // namespace

TEST_CASE("AS scales every sample by exactly 0.9") {
  const audio::Waveform w = noise_clip(0.4, 24000, 1);
  attacks::DistortionSpec spec;
  spec.kind = attacks::Kind::amplitude_scale;
  const audio::Waveform out = attacks::apply(w, spec);
  REQUIRE(out.length() == w.length());
  for (int i = 0; i < w.length(); ++i) CHECK(out.samples[i] == w.samples[i] * 0.9);
  // induced SNR of the 0.9 scaling is exactly 20 dB
  CHECK(measured_snr(w, out) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("GN hits the drawn SNR target") {
  const audio::Waveform w = tone(800.0, 0.6, 24000);
  for (uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    const attacks::DistortionSpec spec =
        attacks::random_attack_spec({attacks::Kind::gaussian_noise}, seed);
    REQUIRE(spec.kind == attacks::Kind::gaussian_noise);
    CHECK(spec.snr_db >= 20.0);
    CHECK(spec.snr_db <= 40.0);
    const audio::Waveform out = attacks::apply(w, spec);
    CHECK(std::abs(measured_snr(w, out) - spec.snr_db) < 0.5);
  }
}

TEST_CASE("QTZ output has at most 256 distinct values") {
  const audio::Waveform w = noise_clip(0.5, 24000, 3, 0.8);
  attacks::DistortionSpec spec;
  spec.kind = attacks::Kind::quantize;
  const audio::Waveform out = attacks::apply(w, spec);
  std::set<double> distinct(out.samples.begin(), out.samples.end());
  CHECK(distinct.size() <= 256);
}

TEST_CASE("SS zeroes exactly round(0.001*N) samples") {
  const audio::Waveform w = tone(333.0, 1.0, 24000, 0.5);
  attacks::DistortionSpec spec;
  spec.kind = attacks::Kind::sample_suppress;
  spec.seed = 77;
  const audio::Waveform out = attacks::apply(w, spec);
  const int expect = static_cast<int>(std::llround(0.001 * w.length()));
  int changed = 0;
  for (int i = 0; i < w.length(); ++i)
    if (out.samples[i] == 0.0 && w.samples[i] != 0.0) ++changed;
  CHECK(changed == expect);
}

TEST_CASE("MF is a 3-point median with replicated edges") {
  audio::Waveform w;
  w.sample_rate = 24000;
  w.samples = {0.1, 0.9, 0.2, 0.3, -0.5, 0.0};
  attacks::DistortionSpec spec;
  spec.kind = attacks::Kind::median_filter;
  const audio::Waveform out = attacks::apply(w, spec);
  CHECK(out.samples[0] == doctest::Approx(0.1));
  CHECK(out.samples[1] == doctest::Approx(0.2));
  CHECK(out.samples[2] == doctest::Approx(0.3));
  CHECK(out.samples[3] == doctest::Approx(0.2));
  CHECK(out.samples[4] == doctest::Approx(0.0));
  CHECK(out.samples[5] == doctest::Approx(0.0));
}

TEST_CASE("LP passes 1 kHz, is ~3 dB down at the 5 kHz cutoff, kills 9 kHz") {
  attacks::DistortionSpec spec;
  spec.kind = attacks::Kind::lowpass;
  auto gain_at = [&](double freq) {
    const audio::Waveform w = tone(freq, 0.5, 24000);
    const audio::Waveform out = attacks::apply(w, spec);
    double in_rms = 0.0, out_rms = 0.0;
    for (int i = w.length() / 2; i < w.length(); ++i) {
      in_rms += w.samples[i] * w.samples[i];
      out_rms += out.samples[i] * out.samples[i];
    }
    return 10.0 * std::log10(out_rms / in_rms);
  };
  CHECK(std::abs(gain_at(1000.0)) < 0.5);
  CHECK(gain_at(5000.0) == doctest::Approx(-3.0).epsilon(0.5));
  CHECK(gain_at(9000.0) < -30.0);
}

TEST_CASE("EA adds an attenuated delayed copy and clips to [-1, 1]") {
  audio::Waveform w;
  w.sample_rate = 1000;
  w.samples.assign(600, 0.0);
  w.samples[10] = 0.8;
  w.samples[400] = 0.95;
  w.samples[500] = 0.95;  // 500 = 400 + delay(100ms @ 1kHz) -> sums past 1
  attacks::DistortionSpec spec;
  spec.kind = attacks::Kind::echo;
  spec.echo_attenuation = 0.25;
  spec.echo_delay_ms = 100.0;
  const audio::Waveform out = attacks::apply(w, spec);
  REQUIRE(out.length() == w.length());
  CHECK(out.samples[10] == doctest::Approx(0.8));
  CHECK(out.samples[110] == doctest::Approx(0.25 * 0.8));
  CHECK(out.samples[500] == doctest::Approx(1.0));  // 0.95 + 0.25*0.95 clipped
  for (double s : out.samples) {
    CHECK(s <= 1.0);
    CHECK(s >= -1.0);
  }
}

TEST_CASE("PN adds noise at 0.1 of the signal RMS with a pink spectrum") {
  const audio::Waveform w = tone(500.0, 1.0, 24000, 0.5);
  attacks::DistortionSpec spec;
  spec.kind = attacks::Kind::pink_noise;
  spec.seed = 5;
  const audio::Waveform out = attacks::apply(w, spec);
  std::vector<double> diff(w.length());
  for (int i = 0; i < w.length(); ++i) diff[i] = out.samples[i] - w.samples[i];
  const double sig_rms = attacks::rms(w.samples);
  CHECK(attacks::rms(diff) == doctest::Approx(0.1 * sig_rms).epsilon(1e-6));
}

TEST_CASE("pink noise PSD falls ~3 dB per octave over 100 Hz - 8 kHz") {
  const int n = 480000;  // 20 s at 24 kHz
  const int rate = 24000;
  const std::vector<double> pink = attacks::pink_noise(n, 99);

  // Welch PSD with our stft
  audio::Waveform w;
  w.sample_rate = rate;
  w.samples = pink;
  audio::StftConfig cfg;
  cfg.n_fft = 2048;
  cfg.hop = 1024;
  cfg.win_length = 2048;
  const audio::Spectrogram spec = audio::stft(w, cfg);
  std::vector<double> psd(spec.magnitude.cols, 0.0);
  for (int t = 0; t < spec.frames(); ++t)
    for (int f = 0; f < spec.magnitude.cols; ++f)
      psd[f] += spec.magnitude.at(t, f) * spec.magnitude.at(t, f);

  const double bin_hz = static_cast<double>(rate) / cfg.n_fft;
  std::vector<double> octave_db;
  for (double lo = 100.0; lo * 2.0 <= 8000.0 * 1.001; lo *= 2.0) {
    double acc = 0.0;
    int cnt = 0;
    for (int f = 1; f < spec.magnitude.cols; ++f) {
      const double hz = f * bin_hz;
      if (hz >= lo && hz < 2.0 * lo) {
        acc += psd[f];
        ++cnt;
      }
    }
    octave_db.push_back(10.0 * std::log10(acc / cnt));
  }
  REQUIRE(octave_db.size() >= 5);
  for (size_t i = 1; i < octave_db.size(); ++i) {
    const double slope = octave_db[i] - octave_db[i - 1];
    CHECK(slope == doctest::Approx(-3.0).epsilon(0.34));  // within about +-1 dB
  }
}

TEST_CASE("every kind preserves the input length") {
  const audio::Waveform w = noise_clip(0.51, 24000, 21);
  for (attacks::Kind kind : attacks::full_catalog()) {
    if (kind == attacks::Kind::mp3 && !attacks::mp3_codec_available()) continue;
    const attacks::DistortionSpec spec = attacks::random_attack_spec({kind}, 5);
    const audio::Waveform out = attacks::apply(w, spec);
    CHECK(out.length() == w.length());
    CHECK(out.sample_rate == w.sample_rate);
  }
}

TEST_CASE("identical (wave, spec, seed) gives bit-identical output") {
  const audio::Waveform w = noise_clip(0.3, 24000, 31);
  for (attacks::Kind kind :
       {attacks::Kind::gaussian_noise, attacks::Kind::sample_suppress, attacks::Kind::pink_noise,
        attacks::Kind::echo, attacks::Kind::resample}) {
    const attacks::DistortionSpec spec = attacks::random_attack_spec({kind}, 1234);
    const audio::Waveform a = attacks::apply(w, spec);
    const audio::Waveform b = attacks::apply(w, spec);
    REQUIRE(a.length() == b.length());
    for (int i = 0; i < a.length(); ++i) CHECK(a.samples[i] == b.samples[i]);
  }
}

TEST_CASE("NONE is the identity") {
  const audio::Waveform w = noise_clip(0.2, 24000, 41);
  attacks::DistortionSpec spec;
  spec.kind = attacks::Kind::none;
  const audio::Waveform out = attacks::apply(w, spec);
  for (int i = 0; i < w.length(); ++i) CHECK(out.samples[i] == w.samples[i]);
}

TEST_CASE("single-kind catalog always draws that kind") {
  for (int i = 0; i < 20; ++i) {
    const auto spec = attacks::random_attack_spec({attacks::Kind::lowpass}, i);
    CHECK(spec.kind == attacks::Kind::lowpass);
  }
}

TEST_CASE("random_attack draws kinds uniformly over a 10-kind catalog") {
  const auto catalog = attacks::full_catalog();
  REQUIRE(catalog.size() == 10);
  std::map<attacks::Kind, int> freq;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto spec = attacks::random_attack_spec(catalog, 9000 + i);
    freq[spec.kind] += 1;
  }
  for (auto kind : catalog) {
    const double f = static_cast<double>(freq[kind]) / draws;
    CHECK(f >= 0.08);
    CHECK(f <= 0.12);
  }
}

TEST_CASE("RS converts to 2x or 0.5x and back without destroying a mid tone") {
  const audio::Waveform w = tone(700.0, 0.4, 24000);
  for (double factor : {2.0, 0.5}) {
    attacks::DistortionSpec spec;
    spec.kind = attacks::Kind::resample;
    spec.resample_factor = factor;
    const audio::Waveform out = attacks::apply(w, spec);
    REQUIRE(out.length() == w.length());
    CHECK(measured_snr(w, out) > 20.0);
  }
}

TEST_CASE("MP3 hook either round-trips or raises the codec-unavailable error") {
  const audio::Waveform w = tone(440.0, 0.3, 24000);
  attacks::DistortionSpec spec;
  spec.kind = attacks::Kind::mp3;
  if (attacks::mp3_codec_available()) {
    const audio::Waveform out = attacks::apply(w, spec);
    CHECK(out.length() == w.length());
    CHECK(measured_snr(w, out) > 5.0);
  } else {
    CHECK_THROWS_AS(attacks::apply(w, spec), CodecUnavailableError);
    MESSAGE("mp3 codec not installed; exercised the unavailable path");
  }
}
