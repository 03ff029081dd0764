// include/codemark/codec.hpp
// Bit embedding into token parities and recovery through the frame localizer
// and the parity restorer.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "codemark/audio.hpp"
#include "codemark/manipulator.hpp"
#include "codemark/nn.hpp"
#include "codemark/stats.hpp"
#include "codemark/vq.hpp"

namespace codemark::codec {

struct ModelsConfig {
  audio::StftConfig stft;
  int sample_rate = audio::kDefaultSampleRate;
  vq::VqModelConfig vq;
  manipulator::ManipulatorConfig manip;

  ModelsConfig() {
    vq.spect_bins = stft.bins();
    manip.codebook_size = vq.codebook_size;
  }
};

// Everything the pipeline needs: the autoencoder, the frame classifiers, the
// token predictor, and the measured detector calibration.
class Models {
 public:
  Models(const ModelsConfig& cfg, uint64_t seed);
  Models(const Models&) = delete;
  Models& operator=(const Models&) = delete;

  const ModelsConfig& config() const { return cfg_; }
  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }
  vq::VqModel& vq() { return *vq_; }
  const vq::VqModel& vq() const { return *vq_; }
  nn::ConvStack& localizer() { return localizer_; }
  nn::ConvStack& restorer() { return restorer_; }
  manipulator::ManipulatorModel& manip() { return *manip_; }
  const manipulator::ManipulatorModel& manip() const { return *manip_; }

  stats::DetectorCalibration calibration;
  bool stage1_trained = false;
  bool stage2_trained = false;

 private:
  ModelsConfig cfg_;
  nn::ParamStore store_;
  std::unique_ptr<vq::VqModel> vq_;
  nn::ConvStack localizer_;
  nn::ConvStack restorer_;
  std::unique_ptr<manipulator::ManipulatorModel> manip_;
};

struct WatermarkPlan {
  std::vector<int> bits;       // length L
  std::vector<int> positions;  // strictly increasing frame indices, |positions| == L
  double ratio = 0.0;          // L / T
  uint64_t seed = 0;

  int payload_bits() const { return static_cast<int>(bits.size()); }
  void validate(int total_frames) const;
  std::string to_json() const;
};

struct LocalizerOutput {
  std::vector<double> scores;  // length T, in [0, 1]
  double threshold = 0.5;
  std::vector<int> detected;   // positions with score > threshold
};

struct RestorerOutput {
  std::vector<double> parity_probs;  // length T, P(token id is odd)
};

enum class SubstitutionMode { manipulator_argmax, manipulator_temperature, random_parity };

struct EmbedOptions {
  std::optional<std::vector<int>> positions;  // defaults to a seeded random draw
  uint64_t seed = 0;
  SubstitutionMode mode = SubstitutionMode::manipulator_argmax;
  double temperature = 1.0;
  bool require_trained = true;
};

struct EmbedResult {
  audio::Waveform watermarked;
  WatermarkPlan plan;
  vq::CodeSequence original_codes;
  vq::CodeSequence watermarked_codes;
  audio::Spectrogram original_spec;
  Tensor watermarked_magnitude;
  int substituted = 0;  // positions whose token was replaced
};

struct DetectOptions {
  std::optional<int> expected_length;
  double threshold = 0.5;
};

struct DetectionReport {
  LocalizerOutput localizer;
  RestorerOutput restorer;
  std::string bits;                 // raw readout over detected positions
  std::vector<double> confidences;  // |2p - 1| per recovered bit
  std::string aligned_bits;         // best-effort alignment to expected_length
  int missing = 0;
  std::string alignment_policy;     // "exact" | "truncated" | "padded-missing"
  std::optional<stats::DetectionVerdict> verdict;

  std::string to_json() const;
};

// Maximum payload for a waveform: floor(0.5 * T).
int capacity_bits(int num_samples, const audio::StftConfig& cfg);

// Parses "0101..." or 0x-prefixed hex into bits (hex expands MSB-first).
std::vector<int> parse_bits(const std::string& text);
std::string bits_to_string(const std::vector<int>& bits);

// Token substitution only (no audio): keeps tokens whose parity already
// matches, otherwise picks a replacement of the required parity. logits may be
// null for random_parity mode.
std::vector<int> substitute_tokens(const std::vector<int>& ids,
                                   const std::vector<int>& positions,
                                   const std::vector<int>& bits, const Tensor* logits,
                                   SubstitutionMode mode, double temperature, int k, Rng& rng,
                                   int* substituted = nullptr);

// Parity readout from a code sequence (the audio-free oracle path).
std::vector<int> read_parities(const std::vector<int>& ids, const std::vector<int>& positions);

// Throws CapacityError when bits exceed floor(0.5*T), MissingPrerequisiteError
// when required models are untrained.
EmbedResult embed(Models& models, const audio::Waveform& wave, const std::vector<int>& bits,
                  const EmbedOptions& opts = {});

LocalizerOutput localizer_forward(Models& models, const Tensor& magnitude,
                                  double threshold = 0.5);
RestorerOutput restorer_forward(Models& models, const Tensor& magnitude);

// Empty detection is a valid result; the verdict is attached when calibration
// has been measured.
DetectionReport detect(Models& models, const audio::Waveform& wave,
                       const DetectOptions& opts = {});

// Mean L2 distance between original and watermarked magnitude rows at the
// given frames (imperceptibility proxy).
double mean_spectral_distance(const Tensor& original, const Tensor& watermarked,
                              const std::vector<int>& positions);

}  // namespace codemark::codec
