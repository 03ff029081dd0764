// src/attacks.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/attacks.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "codemark/errors.hpp"

namespace codemark::attacks {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::none: return "NONE";
    case Kind::gaussian_noise: return "GN";
    case Kind::amplitude_scale: return "AS";
    case Kind::resample: return "RS";
    case Kind::mp3: return "MP3";
    case Kind::median_filter: return "MF";
    case Kind::lowpass: return "LP";
    case Kind::echo: return "EA";
    case Kind::quantize: return "QTZ";
    case Kind::sample_suppress: return "SS";
    case Kind::pink_noise: return "PN";
  }
  return "NONE";
}

std::optional<Kind> kind_from_name(const std::string& name) {
  static const std::array<Kind, 11> kinds = {
      Kind::none,           Kind::gaussian_noise, Kind::amplitude_scale, Kind::resample,
      Kind::mp3,            Kind::median_filter,  Kind::lowpass,         Kind::echo,
      Kind::quantize,       Kind::sample_suppress, Kind::pink_noise};
  for (Kind k : kinds)
    if (name == kind_name(k)) return k;
  return std::nullopt;
}

std::vector<Kind> full_catalog() {
  return {Kind::gaussian_noise, Kind::amplitude_scale, Kind::resample, Kind::mp3,
          Kind::median_filter,  Kind::lowpass,         Kind::echo,     Kind::quantize,
          Kind::sample_suppress, Kind::pink_noise};
}

std::string DistortionSpec::to_json() const {
  std::ostringstream os;
  os.precision(10);
  os << "{\"kind\":\"" << kind_name(kind) << "\",\"seed\":" << seed;
  switch (kind) {
    case Kind::gaussian_noise: os << ",\"snr_db\":" << snr_db; break;
    case Kind::amplitude_scale: os << ",\"scale\":" << scale; break;
    case Kind::resample: os << ",\"factor\":" << resample_factor; break;
    case Kind::mp3: os << ",\"kbps\":" << mp3_kbps; break;
    case Kind::median_filter: os << ",\"kernel\":" << median_kernel; break;
    case Kind::lowpass: os << ",\"cutoff_hz\":" << lowpass_hz; break;
    case Kind::echo:
      os << ",\"attenuation\":" << echo_attenuation << ",\"delay_ms\":" << echo_delay_ms;
      break;
    case Kind::quantize: os << ",\"levels\":" << quantize_levels; break;
    case Kind::sample_suppress: os << ",\"ratio\":" << suppress_ratio; break;
    case Kind::pink_noise: os << ",\"ratio\":" << pink_ratio; break;
    case Kind::none: break;
  }
  os << "}";
  return os.str();
}

double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / x.size());
}

// --- filters -----------------------------------------------------------------

std::vector<double> butterworth_lowpass(double cutoff_hz, double sample_rate) {
  if (!(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0))
    throw std::invalid_argument("cutoff must lie below Nyquist");
  // bilinear transform with prewarped cutoff; order 6 = three biquads
  const double warped = std::tan(kPi * cutoff_hz / sample_rate);
  const std::array<double, 3> q = {
      0.5 / std::cos(7.0 * kPi / 12.0) * -1.0,   // 1.93185
      0.5 / std::cos(9.0 * kPi / 12.0) * -1.0,   // 0.70711
      0.5 / std::cos(11.0 * kPi / 12.0) * -1.0,  // 0.51764
  };
  std::vector<double> coeffs;
  coeffs.reserve(15);
  for (double qk : q) {
    const double k = warped;
    const double a0 = 1.0 + k / qk + k * k;
    coeffs.push_back(k * k / a0);              // b0
    coeffs.push_back(2.0 * k * k / a0);        // b1
    coeffs.push_back(k * k / a0);              // b2
    coeffs.push_back(2.0 * (k * k - 1.0) / a0);  // a1
    coeffs.push_back((1.0 - k / qk + k * k) / a0);  // a2
  }
  return coeffs;
}

void biquad_cascade_forward(const std::vector<double>& coeffs, std::vector<double>& x) {
  for (size_t s = 0; s + 5 <= coeffs.size(); s += 5) {
    const double b0 = coeffs[s], b1 = coeffs[s + 1], b2 = coeffs[s + 2];
    const double a1 = coeffs[s + 3], a2 = coeffs[s + 4];
    double z1 = 0.0, z2 = 0.0;  // transposed direct form II
    for (double& v : x) {
      const double in = v;
      const double out = b0 * in + z1;
      z1 = b1 * in - a1 * out + z2;
      z2 = b2 * in - a2 * out;
      v = out;
    }
  }
}

std::vector<double> pink_noise(int length, uint64_t seed) {
  if (length < 2) return std::vector<double>(std::max(length, 0), 0.0);
  Rng rng(seed);
  const int bins = length / 2 + 1;
  std::vector<std::complex<double>> spec(bins, {0.0, 0.0});
  for (int k = 1; k < bins; ++k) {
    const double mag = 1.0 / std::sqrt(static_cast<double>(k));
    const bool nyquist = (length % 2 == 0 && k == bins - 1);
    if (nyquist)
      spec[k] = {rng.normal() * mag, 0.0};
    else
      spec[k] = {rng.normal() * mag, rng.normal() * mag};
  }
  std::vector<double> out;
  audio::detail::irfft(spec, length, out);
  const double r = rms(out);
  if (r > 0) {
    for (double& v : out) v /= r;
  }
  return out;
}

// --- MP3 hook ----------------------------------------------------------------

namespace {

enum class Mp3Backend { none, lame, ffmpeg };

Mp3Backend probe_mp3_backend() {
  static std::once_flag once;
  static Mp3Backend backend = Mp3Backend::none;
  std::call_once(once, [] {
    if (std::system("lame --version > /dev/null 2>&1") == 0)
      backend = Mp3Backend::lame;
    else if (std::system("ffmpeg -version > /dev/null 2>&1") == 0)
      backend = Mp3Backend::ffmpeg;
  });
  return backend;
}

std::string temp_base() {
  static std::atomic<int> counter{0};
  std::ostringstream os;
  os << "/tmp/codemark_mp3_" << ::getpid() << "_" << counter++;
  return os.str();
}

}  // namespace

bool mp3_codec_available() { return probe_mp3_backend() != Mp3Backend::none; }

audio::Waveform mp3_roundtrip(const audio::Waveform& wave, int kbps) {
  const Mp3Backend backend = probe_mp3_backend();
  if (backend == Mp3Backend::none)
    throw CodecUnavailableError("codec unavailable: no lame or ffmpeg on PATH");

  const std::string base = temp_base();
  const std::string in_wav = base + "_in.wav";
  const std::string mp3 = base + ".mp3";
  const std::string out_wav = base + "_out.wav";
  audio::write_wav(in_wav, wave);

  std::ostringstream enc, dec;
  if (backend == Mp3Backend::lame) {
    enc << "lame --quiet -b " << kbps << " " << in_wav << " " << mp3 << " > /dev/null 2>&1";
    dec << "lame --quiet --decode " << mp3 << " " << out_wav << " > /dev/null 2>&1";
  } else {
    enc << "ffmpeg -v quiet -y -i " << in_wav << " -b:a " << kbps << "k " << mp3;
    dec << "ffmpeg -v quiet -y -i " << mp3 << " -ar " << wave.sample_rate << " " << out_wav;
  }
  const int enc_rc = std::system(enc.str().c_str());
  const int dec_rc = enc_rc == 0 ? std::system(dec.str().c_str()) : -1;
  audio::Waveform out;
  if (dec_rc == 0) out = audio::read_wav(out_wav, wave.sample_rate);
  std::remove(in_wav.c_str());
  std::remove(mp3.c_str());
  std::remove(out_wav.c_str());
  if (dec_rc != 0) throw CodecUnavailableError("codec unavailable: mp3 round trip failed");

  // codecs add priming/padding; align to the original length
  out.samples.resize(wave.samples.size(), 0.0);
  out.sample_rate = wave.sample_rate;
  return out;
}

// --- apply ---------------------------------------------------------------------

audio::Waveform apply(const audio::Waveform& wave, const DistortionSpec& spec,
                      GradInfo* grad_info) {
  wave.validate();
  const int n = wave.length();
  audio::Waveform out = wave;
  GradInfo info;
  info.kind = spec.kind;

  switch (spec.kind) {
    case Kind::none: {
      info.pass_through = true;
      break;
    }
    case Kind::gaussian_noise: {
      Rng rng(spec.seed);
      std::vector<double> noise(n);
      for (double& v : noise) v = rng.normal();
      const double sig_rms = rms(wave.samples);
      const double noise_rms = rms(noise);
      if (sig_rms > 0 && noise_rms > 0) {
        const double target = sig_rms / std::pow(10.0, spec.snr_db / 20.0);
        const double g = target / noise_rms;
        info.rms_noise_unit.resize(n);
        info.rms_direction.resize(n);
        for (int i = 0; i < n; ++i) {
          out.samples[i] += noise[i] * g;
          info.rms_noise_unit[i] = noise[i] * g / sig_rms;
          info.rms_direction[i] = wave.samples[i] / (n * sig_rms);
        }
      }
      info.pass_through = true;
      break;
    }
    case Kind::amplitude_scale: {
      for (double& v : out.samples) v *= spec.scale;
      info.scale = spec.scale;
      break;
    }
    case Kind::resample: {
      const int mid_rate = static_cast<int>(std::llround(wave.sample_rate * spec.resample_factor));
      audio::Waveform mid = audio::resample(wave, mid_rate);
      out = audio::resample(mid, wave.sample_rate);
      out.samples.resize(n, 0.0);
      info.stop_gradient = true;
      break;
    }
    case Kind::mp3: {
      out = mp3_roundtrip(wave, spec.mp3_kbps);
      info.stop_gradient = true;
      break;
    }
    case Kind::median_filter: {
      info.median_pick.resize(n);
      for (int i = 0; i < n; ++i) {
        const int a = std::max(0, i - 1), b = i, c = std::min(n - 1, i + 1);
        // median of three with deterministic index choice
        int lo = a, mid = b, hi = c;
        if (wave.samples[lo] > wave.samples[mid]) std::swap(lo, mid);
        if (wave.samples[mid] > wave.samples[hi]) std::swap(mid, hi);
        if (wave.samples[lo] > wave.samples[mid]) std::swap(lo, mid);
        out.samples[i] = wave.samples[mid];
        info.median_pick[i] = mid;
      }
      break;
    }
    case Kind::lowpass: {
      info.biquads = butterworth_lowpass(spec.lowpass_hz, wave.sample_rate);
      biquad_cascade_forward(info.biquads, out.samples);
      break;
    }
    case Kind::echo: {
      const int delay = std::max(1, static_cast<int>(std::llround(
                                        spec.echo_delay_ms * 1e-3 * wave.sample_rate)));
      info.echo_delay_samples = delay;
      info.echo_attenuation = spec.echo_attenuation;
      info.unclipped.assign(n, 1);
      for (int i = n - 1; i >= 0; --i) {
        double v = wave.samples[i];
        if (i >= delay) v += spec.echo_attenuation * wave.samples[i - delay];
        if (v > 1.0) { v = 1.0; info.unclipped[i] = 0; }
        if (v < -1.0) { v = -1.0; info.unclipped[i] = 0; }
        out.samples[i] = v;
      }
      break;
    }
    case Kind::quantize: {
      const int levels = spec.quantize_levels;
      const double step = 2.0 / levels;
      for (double& v : out.samples) {
        int cell = static_cast<int>(std::floor((v + 1.0) / step));
        cell = std::min(levels - 1, std::max(0, cell));
        v = (cell + 0.5) * step - 1.0;
      }
      info.pass_through = true;  // straight-through
      break;
    }
    case Kind::sample_suppress: {
      const int count = static_cast<int>(std::llround(spec.suppress_ratio * n));
      Rng rng(spec.seed);
      std::vector<int> idx(n);
      for (int i = 0; i < n; ++i) idx[i] = i;
      info.zeroed.reserve(count);
      for (int i = 0; i < count && i < n; ++i) {
        const int j = i + static_cast<int>(rng.uniform_int(n - i));
        std::swap(idx[i], idx[j]);
        out.samples[idx[i]] = 0.0;
        info.zeroed.push_back(idx[i]);
      }
      break;
    }
    case Kind::pink_noise: {
      const std::vector<double> noise = pink_noise(n, spec.seed);
      const double sig_rms = rms(wave.samples);
      const double g = spec.pink_ratio * sig_rms;
      if (sig_rms > 0) {
        info.rms_noise_unit.resize(n);
        info.rms_direction.resize(n);
        for (int i = 0; i < n; ++i) {
          out.samples[i] += noise[i] * g;
          info.rms_noise_unit[i] = noise[i] * g / sig_rms;
          info.rms_direction[i] = wave.samples[i] / (n * sig_rms);
        }
      }
      info.pass_through = true;
      break;
    }
  }

  if (grad_info) *grad_info = std::move(info);
  return out;
}

std::vector<double> backpropagate(const std::vector<double>& grad_out, const GradInfo& info) {
  const int n = static_cast<int>(grad_out.size());
  if (info.stop_gradient) return std::vector<double>(n, 0.0);
  if (info.kind == Kind::gaussian_noise || info.kind == Kind::pink_noise) {
    if (info.rms_noise_unit.empty()) return grad_out;
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += grad_out[i] * info.rms_noise_unit[i];
    std::vector<double> gx = grad_out;
    for (int i = 0; i < n; ++i) gx[i] += dot * info.rms_direction[i];
    return gx;
  }
  if (info.pass_through || info.kind == Kind::none || info.kind == Kind::quantize)
    return grad_out;

  std::vector<double> gx(n, 0.0);
  switch (info.kind) {
    case Kind::amplitude_scale:
      for (int i = 0; i < n; ++i) gx[i] = grad_out[i] * info.scale;
      break;
    case Kind::median_filter:
      for (int i = 0; i < n; ++i) gx[info.median_pick[i]] += grad_out[i];
      break;
    case Kind::lowpass: {
      // adjoint of a causal LTI filter: time-reversed filtering
      gx = grad_out;
      std::reverse(gx.begin(), gx.end());
      biquad_cascade_forward(info.biquads, gx);
      std::reverse(gx.begin(), gx.end());
      break;
    }
    case Kind::echo: {
      const int d = info.echo_delay_samples;
      for (int i = 0; i < n; ++i) {
        const double g = info.unclipped[i] ? grad_out[i] : 0.0;
        gx[i] += g;
        if (i >= d) gx[i - d] += info.echo_attenuation * g;
      }
      break;
    }
    case Kind::sample_suppress: {
      gx = grad_out;
      for (int i : info.zeroed) gx[i] = 0.0;
      break;
    }
    default:
      gx = grad_out;
      break;
  }
  return gx;
}

DistortionSpec random_attack_spec(const std::vector<Kind>& catalog, uint64_t seed) {
  if (catalog.empty()) throw std::invalid_argument("distortion catalog is empty");
  Rng rng(seed);
  DistortionSpec spec;
  spec.kind = catalog[rng.uniform_int(catalog.size())];
  spec.seed = rng.next();
  switch (spec.kind) {
    case Kind::gaussian_noise: spec.snr_db = rng.uniform(20.0, 40.0); break;
    case Kind::echo:
      spec.echo_attenuation = rng.uniform(0.1, 0.3);
      spec.echo_delay_ms = rng.uniform(100.0, 300.0);
      break;
    case Kind::resample: spec.resample_factor = rng.bernoulli(0.5) ? 2.0 : 0.5; break;
    default: break;
  }
  return spec;
}

audio::Waveform random_attack(const audio::Waveform& wave, const std::vector<Kind>& catalog,
                              uint64_t seed, DistortionSpec* used) {
  const DistortionSpec spec = random_attack_spec(catalog, seed);
  if (used) *used = spec;
  return apply(wave, spec);
}

}  // namespace codemark::attacks
