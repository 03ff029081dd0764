// src/audio.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace codemark::audio {

namespace {

constexpr double kPi = 3.14159265358979323846;

// FFTW plan creation is not thread-safe; execution with new arrays is.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    std::vector<double> rbuf(n);
    std::vector<std::complex<double>> cbuf(n / 2 + 1);
    auto* cptr = reinterpret_cast<fftw_complex*>(cbuf.data());
    fwd_ = fftw_plan_dft_r2c_1d(n, rbuf.data(), cptr, FFTW_ESTIMATE | FFTW_UNALIGNED);
    inv_ = fftw_plan_dft_c2r_1d(n, cptr, rbuf.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!fwd_ || !inv_) throw std::runtime_error("fftw plan creation failed");
  }
  ~RealFft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  // out = rfft(in), unnormalized; out has n/2+1 bins.
  void forward(const double* in, std::complex<double>* out) const {
    thread_local std::vector<double> scratch;
    scratch.assign(in, in + n_);
    fftw_execute_dft_r2c(fwd_, scratch.data(), reinterpret_cast<fftw_complex*>(out));
  }

  // out = irfft(in) * n, unnormalized; input is copied (c2r clobbers it).
  void inverse(const std::complex<double>* in, double* out) const {
    thread_local std::vector<std::complex<double>> scratch;
    scratch.assign(in, in + n_ / 2 + 1);
    fftw_execute_dft_c2r(inv_, reinterpret_cast<fftw_complex*>(scratch.data()), out);
  }

 private:
  int n_;
  fftw_plan fwd_;
  fftw_plan inv_;
};

const RealFft& fft_for(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<RealFft>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::make_unique<RealFft>(n)).first;
  return *it->second;
}

std::vector<double> window_square_ola(const StftConfig& cfg, int t_frames) {
  const auto w = detail::make_window(cfg);
  const int padded = (t_frames - 1) * cfg.hop + cfg.n_fft;
  std::vector<double> wsum(padded, 0.0);
  for (int t = 0; t < t_frames; ++t)
    for (int j = 0; j < cfg.n_fft; ++j) wsum[t * cfg.hop + j] += w[j] * w[j];
  return wsum;
}

void check_config(const StftConfig& cfg) {
  if (cfg.hop <= 0 || cfg.win_length <= 0 || cfg.n_fft <= 0)
    throw std::invalid_argument("stft config fields must be positive");
  if (!(cfg.hop <= cfg.win_length && cfg.win_length <= cfg.n_fft))
    throw std::invalid_argument("stft config requires hop <= win_length <= n_fft");
}

}  // namespace

void Waveform::validate() const {
  if (samples.empty()) throw std::invalid_argument("waveform is empty");
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  for (double s : samples)
    if (!std::isfinite(s)) throw std::invalid_argument("waveform has non-finite samples");
}

int FrameMask::weight() const {
  int n = 0;
  for (uint8_t f : flags) n += f;
  return n;
}

int frame_count(int num_samples, const StftConfig& cfg) {
  return (num_samples + cfg.hop - 1) / cfg.hop;
}

namespace detail {

void rfft(const std::vector<double>& in, std::vector<std::complex<double>>& out) {
  const int n = static_cast<int>(in.size());
  out.resize(n / 2 + 1);
  fft_for(n).forward(in.data(), out.data());
}

void irfft(const std::vector<std::complex<double>>& in, int n, std::vector<double>& out) {
  out.resize(n);
  fft_for(n).inverse(in.data(), out.data());
}

std::vector<double> make_window(const StftConfig& cfg) {
  // periodic Hann, centered and zero-padded to n_fft
  std::vector<double> w(cfg.n_fft, 0.0);
  const int off = (cfg.n_fft - cfg.win_length) / 2;
  for (int i = 0; i < cfg.win_length; ++i)
    w[off + i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / cfg.win_length);
  return w;
}

int mirror_index(int i, int len) {
  while (i < 0 || i >= len) {
    if (i < 0) i = -i;
    if (i >= len) i = 2 * len - 2 - i;
  }
  return i;
}

void stft_complex(const std::vector<double>& x, const StftConfig& cfg,
                  int* t_out, std::vector<std::complex<double>>& frames) {
  const int len = static_cast<int>(x.size());
  const int pad = cfg.n_fft / 2;
  const int t_frames = frame_count(len, cfg);
  const int bins = cfg.bins();
  const auto w = make_window(cfg);
  const auto& fft = fft_for(cfg.n_fft);

  frames.assign(static_cast<size_t>(t_frames) * bins, {0.0, 0.0});
  std::vector<double> buf(cfg.n_fft);
  for (int t = 0; t < t_frames; ++t) {
    const int start = t * cfg.hop - pad;
    for (int j = 0; j < cfg.n_fft; ++j)
      buf[j] = x[mirror_index(start + j, len)] * w[j];
    fft.forward(buf.data(), frames.data() + static_cast<size_t>(t) * bins);
  }
  *t_out = t_frames;
}

std::vector<double> istft_from_complex(const std::vector<std::complex<double>>& frames,
                                       int t_frames, const StftConfig& cfg, int out_len) {
  const int bins = cfg.bins();
  const int pad = cfg.n_fft / 2;
  const int padded = (t_frames - 1) * cfg.hop + cfg.n_fft;
  const auto w = make_window(cfg);
  const auto wsum = window_square_ola(cfg, t_frames);
  const auto& fft = fft_for(cfg.n_fft);

  std::vector<double> acc(padded, 0.0);
  std::vector<double> buf(cfg.n_fft);
  const double inv_n = 1.0 / cfg.n_fft;
  for (int t = 0; t < t_frames; ++t) {
    fft.inverse(frames.data() + static_cast<size_t>(t) * bins, buf.data());
    for (int j = 0; j < cfg.n_fft; ++j)
      acc[t * cfg.hop + j] += buf[j] * inv_n * w[j];
  }
  std::vector<double> out(out_len, 0.0);
  for (int i = 0; i < out_len; ++i) {
    const int p = i + pad;
    if (p < padded) out[i] = acc[p] / std::max(wsum[p], 1e-8);
  }
  return out;
}

std::vector<double> stft_adjoint(const std::vector<std::complex<double>>& grad_bins,
                                 int t_frames, const StftConfig& cfg, int x_len) {
  const int bins = cfg.bins();
  const int pad = cfg.n_fft / 2;
  const auto w = make_window(cfg);
  const auto& fft = fft_for(cfg.n_fft);

  std::vector<double> gx(x_len, 0.0);
  std::vector<std::complex<double>> packed(bins);
  std::vector<double> buf(cfg.n_fft);
  for (int t = 0; t < t_frames; ++t) {
    const std::complex<double>* g = grad_bins.data() + static_cast<size_t>(t) * bins;
    packed[0] = {g[0].real(), 0.0};
    packed[bins - 1] = {g[bins - 1].real(), 0.0};
    for (int f = 1; f < bins - 1; ++f) packed[f] = 0.5 * g[f];
    fft.inverse(packed.data(), buf.data());  // sums the cos/sin series exactly
    const int start = t * cfg.hop - pad;
    for (int j = 0; j < cfg.n_fft; ++j)
      gx[mirror_index(start + j, x_len)] += buf[j] * w[j];
  }
  return gx;
}

Tensor istft_adjoint_magnitude(const std::vector<double>& grad_wave,
                               const Tensor& phase, const StftConfig& cfg) {
  const int t_frames = phase.rows;
  const int bins = cfg.bins();
  const int pad = cfg.n_fft / 2;
  const int padded = (t_frames - 1) * cfg.hop + cfg.n_fft;
  const auto w = make_window(cfg);
  const auto wsum = window_square_ola(cfg, t_frames);
  const auto& fft = fft_for(cfg.n_fft);

  std::vector<double> gacc(padded, 0.0);
  for (size_t i = 0; i < grad_wave.size(); ++i) {
    const int p = static_cast<int>(i) + pad;
    if (p < padded) gacc[p] = grad_wave[i] / std::max(wsum[p], 1e-8);
  }

  Tensor gmag(t_frames, bins);
  std::vector<double> gfr(cfg.n_fft);
  std::vector<std::complex<double>> gX(bins);
  const double inv_n = 1.0 / cfg.n_fft;
  for (int t = 0; t < t_frames; ++t) {
    for (int j = 0; j < cfg.n_fft; ++j) gfr[j] = gacc[t * cfg.hop + j] * w[j];
    fft.forward(gfr.data(), gX.data());
    for (int f = 0; f < bins; ++f) {
      const bool edge = (f == 0 || f == bins - 1);
      const double c = edge ? inv_n : 2.0 * inv_n;
      const double d_re = c * gX[f].real();
      const double d_im = edge ? 0.0 : c * gX[f].imag();
      const double ph = phase.at(t, f);
      gmag.at(t, f) = d_re * std::cos(ph) + d_im * std::sin(ph);
    }
  }
  return gmag;
}

}  // namespace detail

Spectrogram stft(const Waveform& wave, const StftConfig& cfg) {
  check_config(cfg);
  wave.validate();
  if (wave.length() < cfg.win_length) throw std::invalid_argument("signal too short");

  int t_frames = 0;
  std::vector<std::complex<double>> frames;
  detail::stft_complex(wave.samples, cfg, &t_frames, frames);
  const int bins = cfg.bins();

  Spectrogram spec;
  spec.config = cfg;
  spec.num_samples = wave.length();
  spec.sample_rate = wave.sample_rate;
  spec.magnitude = Tensor(t_frames, bins);
  spec.phase = Tensor(t_frames, bins);
  for (int t = 0; t < t_frames; ++t) {
    for (int f = 0; f < bins; ++f) {
      const auto& c = frames[static_cast<size_t>(t) * bins + f];
      spec.magnitude.at(t, f) = std::abs(c);
      double p = std::atan2(c.imag(), c.real());
      if (p <= -kPi) p += 2.0 * kPi;  // keep phase in (-pi, pi]
      spec.phase.at(t, f) = p;
    }
  }
  return spec;
}

Waveform istft(const Spectrogram& spec) {
  check_config(spec.config);
  const int t_frames = spec.magnitude.rows;
  const int bins = spec.config.bins();
  if (t_frames < 1 || spec.magnitude.cols != bins || !spec.magnitude.same_shape(spec.phase))
    throw std::invalid_argument("spectrogram shape inconsistent with config");

  std::vector<std::complex<double>> frames(static_cast<size_t>(t_frames) * bins);
  for (int t = 0; t < t_frames; ++t)
    for (int f = 0; f < bins; ++f)
      frames[static_cast<size_t>(t) * bins + f] =
          std::polar(spec.magnitude.at(t, f), spec.phase.at(t, f));

  const int out_len = spec.num_samples > 0 ? spec.num_samples : t_frames * spec.config.hop;
  Waveform out;
  out.sample_rate = spec.sample_rate;
  out.samples = detail::istft_from_complex(frames, t_frames, spec.config, out_len);
  return out;
}

FrameMask sample_mask(int t_frames, double gamma, uint64_t seed) {
  if (t_frames < 1) throw std::invalid_argument("frame count must be >= 1");
  if (!(gamma > 0.0 && gamma <= 0.5))
    throw std::invalid_argument("mask ratio must lie in (0, 0.5]");
  const int count = static_cast<int>(std::llround(gamma * t_frames));

  FrameMask mask;
  mask.ratio = gamma;
  mask.flags.assign(t_frames, 0);
  std::vector<int> idx(t_frames);
  for (int i = 0; i < t_frames; ++i) idx[i] = i;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(t_frames - i));
    std::swap(idx[i], idx[j]);
    mask.flags[idx[i]] = 1;
  }
  return mask;
}

// --- WAV I/O ----------------------------------------------------------------

namespace {

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24);
}
uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return b[0] | (b[1] << 8);
}
void write_u32(std::ostream& out, uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  out.write(b, 4);
}
void write_u16(std::ostream& out, uint16_t v) {
  char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::string& path, int resample_to) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open wav file: " + path);

  char tag[4];
  in.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("not a RIFF file: " + path);
  read_u32(in);
  in.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("not a WAVE file: " + path);

  uint16_t channels = 0, bits = 0, format = 0;
  uint32_t rate = 0;
  std::vector<int16_t> pcm;
  bool got_fmt = false, got_data = false;
  while (in && !(got_fmt && got_data)) {
    in.read(tag, 4);
    if (!in) break;
    uint32_t size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_u16(in);
      channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      pcm.resize(size / 2);
      in.read(reinterpret_cast<char*>(pcm.data()), size & ~1u);
      got_data = true;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!got_fmt || !got_data) throw std::runtime_error("malformed wav file: " + path);
  if (format != 1 || bits != 16) throw std::runtime_error("only PCM 16-bit wav is supported: " + path);
  if (channels != 1) throw std::runtime_error("only mono wav is supported: " + path);

  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  wave.samples.resize(pcm.size());
  for (size_t i = 0; i < pcm.size(); ++i) wave.samples[i] = pcm[i] / 32768.0;
  if (resample_to > 0 && resample_to != wave.sample_rate) wave = resample(wave, resample_to);
  return wave;
}

void write_wav(const std::string& path, const Waveform& wave) {
  wave.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write wav file: " + path);

  const uint32_t data_bytes = static_cast<uint32_t>(wave.samples.size()) * 2;
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<uint32_t>(wave.sample_rate));
  write_u32(out, static_cast<uint32_t>(wave.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (double s : wave.samples) {
    long v = std::lround(s * 32768.0);
    v = std::min(32767L, std::max(-32768L, v));
    write_u16(out, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
}

// --- resampling --------------------------------------------------------------

namespace {

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < 1e-14 * sum) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

}  // namespace

Waveform resample(const Waveform& wave, int new_rate) {
  wave.validate();
  if (new_rate <= 0) throw std::invalid_argument("target rate must be positive");
  if (new_rate == wave.sample_rate) return wave;

  const double ratio = static_cast<double>(wave.sample_rate) / new_rate;  // in-samples per out-sample
  const double scale = std::min(1.0, static_cast<double>(new_rate) / wave.sample_rate);
  const double fc = 0.475 * scale;      // cycles per input sample
  const double half_width = 32.0 / scale;
  const double beta = 8.0;
  const double i0_beta = bessel_i0(beta);
  const int in_len = wave.length();
  const int out_len = static_cast<int>(std::llround(static_cast<double>(in_len) * new_rate / wave.sample_rate));

  Waveform out;
  out.sample_rate = new_rate;
  out.samples.assign(std::max(out_len, 1), 0.0);
  for (int n = 0; n < out_len; ++n) {
    const double center = n * ratio;
    const int m0 = static_cast<int>(std::ceil(center - half_width));
    const int m1 = static_cast<int>(std::floor(center + half_width));
    double acc = 0.0, wacc = 0.0;
    for (int m = m0; m <= m1; ++m) {
      const double t = center - m;
      const double u = t / half_width;
      const double win = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
      const double h = 2.0 * fc * sinc(2.0 * fc * t) * win;
      wacc += h;
      if (m >= 0 && m < in_len) acc += wave.samples[m] * h;
    }
    out.samples[n] = wacc > 1e-12 ? acc / wacc : 0.0;
  }
  return out;
}

}  // namespace codemark::audio
