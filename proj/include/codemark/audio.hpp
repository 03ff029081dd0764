// include/codemark/audio.hpp
// Waveform <-> (magnitude, phase) spectrogram conversion, frame masks,
// WAV file I/O and sample-rate conversion.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "codemark/rng.hpp"
#include "codemark/tensor.hpp"

namespace codemark::audio {

constexpr int kDefaultSampleRate = 24000;

struct Waveform {
  std::vector<double> samples;  // nominally within [-1, 1]; clamped at file I/O
  int sample_rate = kDefaultSampleRate;

  int length() const { return static_cast<int>(samples.size()); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  // Throws std::invalid_argument on empty/non-finite samples or rate <= 0.
  void validate() const;
};

enum class Window { hann };

struct StftConfig {
  int n_fft = 400;
  int hop = 80;
  int win_length = 400;
  Window window = Window::hann;

  int bins() const { return n_fft / 2 + 1; }
  bool operator==(const StftConfig& o) const {
    return n_fft == o.n_fft && hop == o.hop && win_length == o.win_length &&
           window == o.window;
  }
};

struct Spectrogram {
  Tensor magnitude;  // T x F, non-negative
  Tensor phase;      // T x F, in (-pi, pi]
  StftConfig config;
  int num_samples = 0;  // framing metadata: original waveform length
  int sample_rate = kDefaultSampleRate;

  int frames() const { return magnitude.rows; }
};

struct FrameMask {
  std::vector<uint8_t> flags;  // length T, values 0/1
  double ratio = 0.0;

  int frames() const { return static_cast<int>(flags.size()); }
  int weight() const;
};

// Number of frames produced for a waveform of the given length: ceil(len/hop).
int frame_count(int num_samples, const StftConfig& cfg);

// Center-padded (reflect) analysis. Throws std::invalid_argument when the
// signal is shorter than one window ("signal too short").
Spectrogram stft(const Waveform& wave, const StftConfig& cfg = StftConfig{});

// Weighted overlap-add synthesis. Output length is spec.num_samples when set,
// otherwise T * hop.
Waveform istft(const Spectrogram& spec);

// Exactly llround(gamma * T) flags set, chosen uniformly without replacement.
// gamma must lie in (0, 0.5].
FrameMask sample_mask(int t_frames, double gamma, uint64_t seed);

// --- WAV I/O (PCM 16-bit mono) ---------------------------------------------

// Reads a mono 16-bit PCM WAV. When resample_to > 0 and differs from the file
// rate, the signal is converted with the windowed-sinc resampler; otherwise a
// rate mismatch with expect_rate (if > 0) raises an error.
Waveform read_wav(const std::string& path, int resample_to = 0);
void write_wav(const std::string& path, const Waveform& wave);

// Kaiser-windowed sinc resampling to a new rate.
Waveform resample(const Waveform& wave, int new_rate);

// --- shared low-level pieces (also used by the training graph) -------------
namespace detail {

// Unnormalized real FFT helpers (plan-cached, thread-safe to execute).
void rfft(const std::vector<double>& in, std::vector<std::complex<double>>& out);
void irfft(const std::vector<std::complex<double>>& in, int n, std::vector<double>& out);

// Analysis window of length n_fft (win_length window centered, zero padded).
std::vector<double> make_window(const StftConfig& cfg);

// Reflect-padded index into a signal of the given length.
int mirror_index(int i, int len);

// Complex STFT frames, unnormalized rFFT of windowed frames. Output is
// T * bins contiguous, frame-major.
void stft_complex(const std::vector<double>& x, const StftConfig& cfg,
                  int* t_out, std::vector<std::complex<double>>& frames);

// Overlap-add synthesis from complex frames; returns out_len samples.
std::vector<double> istft_from_complex(const std::vector<std::complex<double>>& frames,
                                       int t_frames, const StftConfig& cfg, int out_len);

// Adjoint of the (window + frame + rFFT) analysis map: folds per-bin gradients
// (d/dRe, d/dIm packed as complex) back to a signal gradient of length x_len.
std::vector<double> stft_adjoint(const std::vector<std::complex<double>>& grad_bins,
                                 int t_frames, const StftConfig& cfg, int x_len);

// Adjoint of istft_from_complex at fixed phase: maps a waveform gradient to a
// magnitude gradient (T x F).
Tensor istft_adjoint_magnitude(const std::vector<double>& grad_wave,
                               const Tensor& phase, const StftConfig& cfg);

}  // namespace detail

}  // namespace codemark::audio
