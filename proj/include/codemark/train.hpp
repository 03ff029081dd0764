// include/codemark/train.hpp
// Two-stage training: stage 1 fits the autoencoder, localizer and restorer
// jointly under the distortion catalog; stage 2 fits the token predictor on
// the frozen stage-1 codes. Includes the bundled synthetic-speech corpus
// generator and the detector calibration utility.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "codemark/attacks.hpp"
#include "codemark/audio.hpp"
#include "codemark/codec.hpp"
#include "codemark/stats.hpp"

namespace codemark::train {

struct TrainConfig {
  int stage1_steps = 5000;
  int stage2_steps = 2000;
  int batch_size = 8;
  double peak_lr = 2e-3;
  int warmup_steps = 200;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-9;
  double lambda_adv = 1e-2;
  double lambda_res_first = 1.0;   // first half of stage 1
  double lambda_res_second = 0.5;  // second half
  double gamma_min = 0.1;
  double gamma_max = 0.5;
  double clip_seconds = 0.35;  // training crop length
  std::vector<attacks::Kind> catalog = {attacks::Kind::none};
  uint64_t seed = 1234;
  int log_every = 10;
  std::string log_path;  // line-delimited JSON when non-empty

  void validate() const;
  static TrainConfig from_json_file(const std::string& path);
  std::string to_json() const;
};

struct StepRecord {
  int step = 0;
  double total = 0, loc = 0, res = 0, rec = 0, code = 0, adv = 0;
  double lambda_res = 0, lr = 0, gamma = 0;
  std::string to_json() const;
};

struct Stage1Result {
  std::vector<StepRecord> log;
  double final_total = 0.0;
  double restorer_parity_accuracy = 0.0;  // held-out, masked frames
};

struct Stage2Result {
  std::vector<StepRecord> log;
  double masked_accuracy = 0.0;     // held-out top-1 at masked positions
  double marginal_baseline = 0.0;   // accuracy of the most frequent token
};

// --- corpus -----------------------------------------------------------------

// Filtered harmonic excitation with formant resonances and a syllabic
// envelope; self-contained stand-in for speech at desk scale.
audio::Waveform synth_speech(double seconds, int sample_rate, uint64_t seed);
std::vector<audio::Waveform> synth_corpus(int clips, double seconds, int sample_rate,
                                          uint64_t seed);
void write_corpus_dir(const std::string& dir, const std::vector<audio::Waveform>& corpus);
std::vector<audio::Waveform> load_corpus_dir(const std::string& dir, int sample_rate);

// --- training ----------------------------------------------------------------

// Joint stage-1 optimization. Throws on an empty corpus; aborts with a
// diagnostic when the loss stops being finite.
Stage1Result train_stage1(codec::Models& models, const std::vector<audio::Waveform>& corpus,
                          const TrainConfig& cfg, vq::AdversarialLoss* adversary = nullptr);

// Stage 2 over an arbitrary token-sequence source (used directly by tests).
using TokenProvider = std::function<std::vector<int>(Rng&)>;
Stage2Result train_stage2_tokens(codec::Models& models, const TokenProvider& provider,
                                 const TrainConfig& cfg);

// Stage 2 over audio: crops a clip, encodes and quantizes with the frozen
// stage-1 models, then fits the masked token predictor.
Stage2Result train_stage2(codec::Models& models, const std::vector<audio::Waveform>& corpus,
                          const TrainConfig& cfg);

// Measures frame-level alpha/beta on held-out clips at the given threshold and
// stores the result in models.calibration.
stats::DetectorCalibration calibrate(codec::Models& models,
                                     const std::vector<audio::Waveform>& heldout,
                                     double watermark_ratio, double threshold, uint64_t seed,
                                     codec::SubstitutionMode mode,
                                     const std::string& source_label);

}  // namespace codemark::train
