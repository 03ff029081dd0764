// include/codemark/metrics.hpp
// Evaluation metrics (BER, SNR, BPS, RTF), the information-hiding and
// utterance-detection experiment harnesses, and best-of-n position selection.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "codemark/attacks.hpp"
#include "codemark/audio.hpp"
#include "codemark/codec.hpp"

namespace codemark::metrics {

constexpr double kSnrCapDb = 300.0;  // sentinel for identical signals

// Mismatch fraction; throws on empty or unequal lengths.
double ber(const std::vector<int>& sent, const std::vector<int>& recovered);

// Alignment policy for desynchronized detections: compare the first
// min(L, |recovered|) bits, count missing positions as errors.
double ber_aligned(const std::vector<int>& sent, const std::vector<int>& recovered);

// 10*log10(sum ref^2 / sum (ref-test)^2), capped at kSnrCapDb.
double snr_db(const audio::Waveform& reference, const audio::Waveform& test);

// External PESQ hook: returns a score when a tool is plugged in, otherwise
// nullopt (the metric is reported as unavailable).
using PesqHook = std::function<std::optional<double>(const audio::Waveform& reference,
                                                     const audio::Waveform& test)>;

struct BestOfNResult {
  codec::EmbedResult best;
  double best_snr_db = 0.0;
  std::vector<double> candidate_snrs;  // per candidate, in draw order
};

// Embeds with n independently drawn position sets (nested candidate prefixes
// for a fixed seed) and keeps the plan with the highest SNR.
BestOfNResult select_positions_best_of_n(codec::Models& models, const audio::Waveform& wave,
                                         const std::vector<int>& bits, int n, uint64_t seed,
                                         codec::SubstitutionMode mode =
                                             codec::SubstitutionMode::manipulator_argmax);

struct EvalReport {
  std::map<std::string, double> ber_by_distortion;
  double snr_db = 0.0;
  double bps = 0.0;
  double rtf = 0.0;  // (embed + detect wall time) / audio duration
  double utterance_tpr = 0.0;
  double utterance_fpr = 0.0;
  // (watermark ratio, mean z, mean snr) sweep for the tradeoff curve
  std::vector<std::array<double, 3>> ratio_sweep;
  int clips = 0;
  std::string notes;

  std::string to_json() const;
  std::string ber_table_csv() const;
};

struct EvalOptions {
  int payload_bits = 32;          // per 1-second segment
  double watermark_ratio = 0.1;   // AI-detection mode
  double z_threshold = 4.0;
  std::vector<attacks::Kind> catalog;
  uint64_t seed = 1;
  bool oracle_codes = false;      // bypass audio: read parities from the codes
  int max_clips = 0;              // 0 = all
  std::vector<double> sweep_ratios = {0.03, 0.05, 0.1, 0.2, 0.3, 0.5};
  std::string output_dir;         // plots + tables land here when non-empty
};

// Segment-based protocol: random 1 s crop per clip, fixed payload, BER per
// distortion kind.
EvalReport run_information_hiding_eval(codec::Models& models,
                                       const std::vector<audio::Waveform>& corpus,
                                       const EvalOptions& opts);

// Utterance-level protocol: Z-test decisions on watermarked and clean clips,
// plus the (ratio, z, snr) sweep.
EvalReport run_ai_detection_eval(codec::Models& models,
                                 const std::vector<audio::Waveform>& corpus,
                                 const EvalOptions& opts);

// Minimal line-plot writer (SVG); series are (x, y) pairs.
void write_svg_plot(const std::string& path, const std::string& title,
                    const std::vector<std::pair<double, double>>& series,
                    const std::string& x_label, const std::string& y_label);

}  // namespace codemark::metrics
