// src/codec.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/codec.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "codemark/errors.hpp"

namespace codemark::codec {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Models::Models(const ModelsConfig& cfg, uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  vq::VqModelConfig vq_cfg = cfg.vq;
  vq_cfg.spect_bins = cfg.stft.bins();
  vq_ = std::make_unique<vq::VqModel>(store_, vq_cfg, rng);
  // the localizer and restorer share the masked decoder's stack shape
  localizer_ = nn::ConvStack(store_, "localizer", vq_cfg.spect_bins, vq_cfg.hidden, 1,
                             vq_cfg.kernel, vq_cfg.decoder_dilations, rng, /*zero_out=*/true);
  restorer_ = nn::ConvStack(store_, "restorer", vq_cfg.spect_bins, vq_cfg.hidden, 1,
                            vq_cfg.kernel, vq_cfg.decoder_dilations, rng, /*zero_out=*/true);
  manipulator::ManipulatorConfig m_cfg = cfg.manip;
  m_cfg.codebook_size = vq_cfg.codebook_size;
  manip_ = std::make_unique<manipulator::ManipulatorModel>(store_, m_cfg, rng);
}

void WatermarkPlan::validate(int total_frames) const {
  if (bits.empty()) throw std::invalid_argument("watermark payload is empty");
  if (bits.size() != positions.size())
    throw std::invalid_argument("bits and positions length mismatch");
  for (size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] < 0 || positions[i] >= total_frames)
      throw std::invalid_argument("watermark position out of range");
    if (i > 0 && positions[i] <= positions[i - 1])
      throw std::invalid_argument("watermark positions must be strictly increasing");
  }
  if (ratio > 0.5 + 1e-12) throw CapacityError("capacity exceeded");
}

std::string WatermarkPlan::to_json() const {
  std::ostringstream os;
  os.precision(10);
  os << "{\"bits\":\"";
  for (int b : bits) os << (b ? '1' : '0');
  os << "\",\"positions\":[";
  for (size_t i = 0; i < positions.size(); ++i) os << (i ? "," : "") << positions[i];
  os << "],\"ratio\":" << ratio << ",\"seed\":" << seed << "}";
  return os.str();
}

std::string DetectionReport::to_json() const {
  std::ostringstream os;
  os.precision(10);
  os << "{\"detected\":[";
  for (size_t i = 0; i < localizer.detected.size(); ++i)
    os << (i ? "," : "") << localizer.detected[i];
  os << "],\"bits\":\"" << bits << "\",\"confidences\":[";
  for (size_t i = 0; i < confidences.size(); ++i) os << (i ? "," : "") << confidences[i];
  os << "],\"aligned_bits\":\"" << aligned_bits << "\",\"missing\":" << missing
     << ",\"alignment\":\"" << alignment_policy << "\"";
  if (verdict) os << ",\"verdict\":" << verdict->to_json();
  os << "}";
  return os.str();
}

int capacity_bits(int num_samples, const audio::StftConfig& cfg) {
  return audio::frame_count(num_samples, cfg) / 2;
}

std::vector<int> parse_bits(const std::string& text) {
  std::vector<int> bits;
  if (text.rfind("0x", 0) == 0 || text.rfind("0X", 0) == 0) {
    for (size_t i = 2; i < text.size(); ++i) {
      const char c = text[i];
      int v;
      if (c >= '0' && c <= '9') v = c - '0';
      else if (c >= 'a' && c <= 'f') v = 10 + c - 'a';
      else if (c >= 'A' && c <= 'F') v = 10 + c - 'A';
      else throw std::invalid_argument("invalid hex digit in bit string");
      for (int b = 3; b >= 0; --b) bits.push_back((v >> b) & 1);
    }
  } else {
    for (char c : text) {
      if (c == '0') bits.push_back(0);
      else if (c == '1') bits.push_back(1);
      else throw std::invalid_argument("bit strings may contain only 0 and 1");
    }
  }
  if (bits.empty()) throw std::invalid_argument("empty bit string");
  return bits;
}

std::string bits_to_string(const std::vector<int>& bits) {
  std::string s;
  s.reserve(bits.size());
  for (int b : bits) s.push_back(b ? '1' : '0');
  return s;
}

std::vector<int> substitute_tokens(const std::vector<int>& ids,
                                   const std::vector<int>& positions,
                                   const std::vector<int>& bits, const Tensor* logits,
                                   SubstitutionMode mode, double temperature, int k, Rng& rng,
                                   int* substituted) {
  std::vector<int> out = ids;
  int changed = 0;
  for (size_t i = 0; i < positions.size(); ++i) {
    const int t = positions[i];
    const int b = bits[i];
    if ((out[t] & 1) == b) continue;  // original token already carries the bit
    int picked;
    if (mode == SubstitutionMode::random_parity || logits == nullptr) {
      const int class_size = (k + (b == 0 ? 1 : 0)) / 2;
      picked = 2 * static_cast<int>(rng.uniform_int(class_size)) + b;
    } else {
      const auto sm = mode == SubstitutionMode::manipulator_argmax
                          ? manipulator::SampleMode::argmax
                          : manipulator::SampleMode::temperature;
      picked = manipulator::sample_parity_token(logits->row(t), k, b, sm, temperature, rng);
    }
    out[t] = picked;
    ++changed;
  }
  if (substituted) *substituted = changed;
  return out;
}

std::vector<int> read_parities(const std::vector<int>& ids, const std::vector<int>& positions) {
  std::vector<int> bits;
  bits.reserve(positions.size());
  for (int t : positions) bits.push_back(ids[t] & 1);
  return bits;
}

EmbedResult embed(Models& models, const audio::Waveform& wave, const std::vector<int>& bits,
                  const EmbedOptions& opts) {
  wave.validate();
  if (bits.empty()) throw std::invalid_argument("watermark payload is empty");
  if (opts.require_trained && !models.stage1_trained)
    throw MissingPrerequisiteError("stage-1 models are untrained");
  const bool use_manip = opts.mode != SubstitutionMode::random_parity;
  if (opts.require_trained && use_manip && !models.stage2_trained)
    throw MissingPrerequisiteError("manipulator is untrained");

  EmbedResult result;
  result.original_spec = audio::stft(wave, models.config().stft);
  const int t_frames = result.original_spec.frames();
  const int capacity = t_frames / 2;
  const int payload = static_cast<int>(bits.size());
  if (payload > capacity) throw CapacityError("capacity exceeded");

  Rng rng(opts.seed);
  std::vector<int> positions;
  if (opts.positions) {
    positions = *opts.positions;
  } else {
    std::vector<int> idx(t_frames);
    for (int i = 0; i < t_frames; ++i) idx[i] = i;
    for (int i = 0; i < payload; ++i) {
      const int j = i + static_cast<int>(rng.uniform_int(t_frames - i));
      std::swap(idx[i], idx[j]);
    }
    positions.assign(idx.begin(), idx.begin() + payload);
    std::sort(positions.begin(), positions.end());
  }

  result.plan.bits = bits;
  result.plan.positions = positions;
  result.plan.ratio = static_cast<double>(payload) / t_frames;
  result.plan.seed = opts.seed;
  result.plan.validate(t_frames);

  const Tensor latents = models.vq().encode(result.original_spec.magnitude);
  vq::QuantizeResult q = vq::quantize(latents, models.vq().codebook());
  result.original_codes = q.codes;

  audio::FrameMask mask;
  mask.flags.assign(t_frames, 0);
  for (int t : positions) mask.flags[t] = 1;
  mask.ratio = result.plan.ratio;

  const Tensor* logits_ptr = nullptr;
  manipulator::TokenDistribution dist;
  if (use_manip) {
    dist = models.manip().predict_masked(result.original_codes.ids, mask);
    logits_ptr = &dist.logits;
  }
  Rng sub_rng = rng.fork(1);
  std::vector<int> new_ids = substitute_tokens(
      result.original_codes.ids, positions, bits, logits_ptr, opts.mode, opts.temperature,
      models.vq().codebook().size(), sub_rng, &result.substituted);

  result.watermarked_codes.ids = new_ids;
  result.watermarked_codes.vectors = Tensor(t_frames, models.vq().codebook().dim());
  for (int t = 0; t < t_frames; ++t) {
    const double* e = models.vq().codebook().entries.row(new_ids[t]);
    std::copy(e, e + models.vq().codebook().dim(), result.watermarked_codes.vectors.row(t));
  }

  result.watermarked_magnitude =
      models.vq().masked_decode(result.watermarked_codes, result.original_spec.magnitude, mask);

  audio::Spectrogram wm_spec = result.original_spec;
  wm_spec.magnitude = result.watermarked_magnitude;
  result.watermarked = audio::istft(wm_spec);
  return result;
}

LocalizerOutput localizer_forward(Models& models, const Tensor& magnitude, double threshold) {
  if (magnitude.cols != models.config().stft.bins())
    throw std::invalid_argument("magnitude bin count does not match model");
  const Tensor logits = models.localizer().infer(vq::compress_magnitude(magnitude));
  LocalizerOutput out;
  out.threshold = threshold;
  out.scores.resize(magnitude.rows);
  for (int t = 0; t < magnitude.rows; ++t) {
    out.scores[t] = sigmoid(logits.at(t, 0));
    if (out.scores[t] > threshold) out.detected.push_back(t);
  }
  return out;
}

RestorerOutput restorer_forward(Models& models, const Tensor& magnitude) {
  if (magnitude.cols != models.config().stft.bins())
    throw std::invalid_argument("magnitude bin count does not match model");
  const Tensor logits = models.restorer().infer(vq::compress_magnitude(magnitude));
  RestorerOutput out;
  out.parity_probs.resize(magnitude.rows);
  for (int t = 0; t < magnitude.rows; ++t) out.parity_probs[t] = sigmoid(logits.at(t, 0));
  return out;
}

DetectionReport detect(Models& models, const audio::Waveform& wave, const DetectOptions& opts) {
  wave.validate();
  const audio::Spectrogram spec = audio::stft(wave, models.config().stft);
  DetectionReport report;
  report.localizer = localizer_forward(models, spec.magnitude, opts.threshold);
  report.restorer = restorer_forward(models, spec.magnitude);

  for (int t : report.localizer.detected) {
    const double p = report.restorer.parity_probs[t];
    report.bits.push_back(p > 0.5 ? '1' : '0');
    report.confidences.push_back(std::abs(2.0 * p - 1.0));
  }

  if (opts.expected_length) {
    const int expected = *opts.expected_length;
    const int got = static_cast<int>(report.bits.size());
    if (got == expected) {
      report.alignment_policy = "exact";
      report.aligned_bits = report.bits;
    } else if (got > expected) {
      report.alignment_policy = "truncated";
      report.aligned_bits = report.bits.substr(0, expected);
    } else {
      report.alignment_policy = "padded-missing";
      report.aligned_bits = report.bits;
      report.missing = expected - got;
    }
  } else {
    report.alignment_policy = "exact";
    report.aligned_bits = report.bits;
  }

  if (models.calibration.valid()) {
    report.verdict = stats::make_verdict(static_cast<int>(report.localizer.detected.size()),
                                         spec.frames(), models.calibration.beta);
  }
  return report;
}

double mean_spectral_distance(const Tensor& original, const Tensor& watermarked,
                              const std::vector<int>& positions) {
  if (!original.same_shape(watermarked))
    throw std::invalid_argument("spectrogram shapes differ");
  if (positions.empty()) return 0.0;
  double acc = 0.0;
  for (int t : positions) {
    double d2 = 0.0;
    for (int c = 0; c < original.cols; ++c) {
      const double d = original.at(t, c) - watermarked.at(t, c);
      d2 += d * d;
    }
    acc += std::sqrt(d2);
  }
  return acc / positions.size();
}

}  // namespace codemark::codec
