// include/codemark/attacks.hpp
// Signal distortion catalog used for robustness training and evaluation.
// Every distortion is deterministic given its spec (kind, params, seed) and
// preserves the input length.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "codemark/audio.hpp"
#include "codemark/rng.hpp"

namespace codemark::attacks {

enum class Kind {
  none,
  gaussian_noise,      // GN: SNR target drawn from [20, 40] dB
  amplitude_scale,     // AS: samples * 0.9
  resample,            // RS: to 2x or 0.5x rate and back
  mp3,                 // MP3: 64 kbps round trip via external codec
  median_filter,       // MF: kernel 3
  lowpass,             // LP: 5 kHz cutoff, 6th-order Butterworth
  echo,                // EA: attenuation U(0.1,0.3), delay U(100,300) ms
  quantize,            // QTZ: 2^8 levels
  sample_suppress,     // SS: zero round(0.001*N) samples
  pink_noise,          // PN: amplitude ratio 0.1 of signal RMS
};

const char* kind_name(Kind k);
std::optional<Kind> kind_from_name(const std::string& name);

// All distortion kinds carrying a payload; catalogs are built from these.
std::vector<Kind> full_catalog();

struct DistortionSpec {
  Kind kind = Kind::none;
  uint64_t seed = 0;

  // kind-specific parameters (set by random_attack or by hand)
  double snr_db = 30.0;          // GN
  double scale = 0.9;            // AS
  double resample_factor = 2.0;  // RS: 2.0 or 0.5
  int mp3_kbps = 64;             // MP3
  int median_kernel = 3;         // MF
  double lowpass_hz = 5000.0;    // LP
  double echo_attenuation = 0.2; // EA
  double echo_delay_ms = 200.0;  // EA
  int quantize_levels = 256;     // QTZ
  double suppress_ratio = 0.001; // SS
  double pink_ratio = 0.1;       // PN

  std::string to_json() const;
};

// Per-kind data recorded by apply() that the training graph needs to route
// gradients. Kinds resample/mp3 are treated as stop-gradient augmentation.
struct GradInfo {
  Kind kind = Kind::none;
  bool pass_through = false;            // gradient is identity
  bool stop_gradient = false;           // RS / MP3
  double scale = 1.0;                   // AS
  std::vector<int> median_pick;         // MF: index of the median source sample
  std::vector<uint8_t> unclipped;       // EA: 1 where |pre-clip| < 1
  double echo_attenuation = 0.0;        // EA
  int echo_delay_samples = 0;           // EA
  std::vector<int> zeroed;              // SS
  // LP biquad cascade coefficients (b0,b1,b2,a1,a2) x 3 sections
  std::vector<double> biquads;
  // GN/PN scale the noise by the signal RMS; the exact Jacobian picks up a
  // rank-one term: dL/dx = g + (g . v) w with v = noise/rms, w = x/(N*rms).
  std::vector<double> rms_noise_unit;   // v
  std::vector<double> rms_direction;    // w
};

// Applies the distortion. Output has the same length and sample rate as the
// input. Throws CodecUnavailableError when kind == mp3 and no codec is found.
audio::Waveform apply(const audio::Waveform& wave, const DistortionSpec& spec,
                      GradInfo* grad_info = nullptr);

// Maps dL/d(output) to dL/d(input) using the recorded GradInfo.
std::vector<double> backpropagate(const std::vector<double>& grad_out, const GradInfo& info);

// Uniformly samples a kind from the catalog and draws its parameters.
DistortionSpec random_attack_spec(const std::vector<Kind>& catalog, uint64_t seed);
audio::Waveform random_attack(const audio::Waveform& wave, const std::vector<Kind>& catalog,
                              uint64_t seed, DistortionSpec* used = nullptr);

// External MP3 codec hook: PCM in, 64 kbps MP3 round trip, PCM out at the
// same rate. Probes `lame` then `ffmpeg` on PATH.
bool mp3_codec_available();
audio::Waveform mp3_roundtrip(const audio::Waveform& wave, int kbps);

// Pink (1/f power) noise with unit RMS, synthesized in the frequency domain.
std::vector<double> pink_noise(int length, uint64_t seed);

// 6th-order Butterworth low-pass as three biquad sections
// (b0,b1,b2,a1,a2 per section); causal filtering helpers.
std::vector<double> butterworth_lowpass(double cutoff_hz, double sample_rate);
void biquad_cascade_forward(const std::vector<double>& coeffs, std::vector<double>& x);

double rms(const std::vector<double>& x);

}  // namespace codemark::attacks
