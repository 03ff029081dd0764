// src/metrics.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/metrics.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "codemark/errors.hpp"
#include "codemark/stats.hpp"

namespace codemark::metrics {

namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

double ber(const std::vector<int>& sent, const std::vector<int>& recovered) {
  if (sent.empty()) throw std::invalid_argument("bit strings are empty");
  if (sent.size() != recovered.size())
    throw std::invalid_argument("bit strings must have equal length");
  int errors = 0;
  for (size_t i = 0; i < sent.size(); ++i) errors += sent[i] != recovered[i];
  return static_cast<double>(errors) / sent.size();
}

double ber_aligned(const std::vector<int>& sent, const std::vector<int>& recovered) {
  if (sent.empty()) throw std::invalid_argument("bit strings are empty");
  const size_t n = std::min(sent.size(), recovered.size());
  int errors = 0;
  for (size_t i = 0; i < n; ++i) errors += sent[i] != recovered[i];
  errors += static_cast<int>(sent.size() - n);  // missing positions count as errors
  return static_cast<double>(errors) / sent.size();
}

double snr_db(const audio::Waveform& reference, const audio::Waveform& test) {
  if (reference.samples.size() != test.samples.size())
    throw std::invalid_argument("waveform lengths differ");
  double sig = 0.0, err = 0.0;
  for (size_t i = 0; i < reference.samples.size(); ++i) {
    sig += reference.samples[i] * reference.samples[i];
    const double d = reference.samples[i] - test.samples[i];
    err += d * d;
  }
  if (err <= 0.0) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(sig / err));
}

BestOfNResult select_positions_best_of_n(codec::Models& models, const audio::Waveform& wave,
                                         const std::vector<int>& bits, int n, uint64_t seed,
                                         codec::SubstitutionMode mode) {
  if (n < 1) throw std::invalid_argument("candidate count must be >= 1");
  BestOfNResult result;
  Rng rng(seed);
  // fixed per-candidate seeds make candidate sets nest as n grows
  std::vector<uint64_t> candidate_seeds(n);
  for (int i = 0; i < n; ++i) candidate_seeds[i] = rng.next();
  bool have_best = false;
  for (int i = 0; i < n; ++i) {
    codec::EmbedOptions opts;
    opts.seed = candidate_seeds[i];
    opts.mode = mode;
    codec::EmbedResult er = codec::embed(models, wave, bits, opts);
    const double s = snr_db(wave, er.watermarked);
    result.candidate_snrs.push_back(s);
    if (!have_best || s > result.best_snr_db) {
      result.best_snr_db = s;
      result.best = std::move(er);
      have_best = true;
    }
  }
  return result;
}

std::string EvalReport::to_json() const {
  std::ostringstream os;
  os.precision(10);
  os << "{\"ber\":{";
  bool first = true;
  for (const auto& [k, v] : ber_by_distortion) {
    os << (first ? "" : ",") << "\"" << k << "\":" << v;
    first = false;
  }
  os << "},\"snr_db\":" << snr_db << ",\"bps\":" << bps << ",\"rtf\":" << rtf
     << ",\"utterance_tpr\":" << utterance_tpr << ",\"utterance_fpr\":" << utterance_fpr
     << ",\"clips\":" << clips << ",\"sweep\":[";
  for (size_t i = 0; i < ratio_sweep.size(); ++i) {
    os << (i ? "," : "") << "[" << ratio_sweep[i][0] << "," << ratio_sweep[i][1] << ","
       << ratio_sweep[i][2] << "]";
  }
  os << "],\"notes\":\"" << notes << "\"}";
  return os.str();
}

std::string EvalReport::ber_table_csv() const {
  std::ostringstream os;
  os << "distortion,ber\n";
  for (const auto& [k, v] : ber_by_distortion) os << k << "," << v << "\n";
  return os.str();
}

namespace {

audio::Waveform crop_segment(const audio::Waveform& wave, int len, Rng& rng) {
  if (wave.length() <= len) return wave;
  const int off = static_cast<int>(rng.uniform_int(wave.length() - len + 1));
  audio::Waveform out;
  out.sample_rate = wave.sample_rate;
  out.samples.assign(wave.samples.begin() + off, wave.samples.begin() + off + len);
  return out;
}

std::vector<int> report_bits(const codec::DetectionReport& report) {
  std::vector<int> out;
  out.reserve(report.bits.size());
  for (char c : report.bits) out.push_back(c == '1' ? 1 : 0);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

EvalReport run_information_hiding_eval(codec::Models& models,
                                       const std::vector<audio::Waveform>& corpus,
                                       const EvalOptions& opts) {
  if (corpus.empty()) throw std::invalid_argument("evaluation corpus is empty");
  if (!models.stage1_trained && !opts.oracle_codes)
    throw MissingPrerequisiteError("trained models required for evaluation");

  Rng rng(opts.seed);
  EvalReport report;
  std::map<std::string, double> ber_sums;
  std::map<std::string, int> ber_counts;
  double snr_sum = 0.0;
  double wall_seconds = 0.0, audio_seconds = 0.0;
  int used = 0;
  bool mp3_skipped = false;

  std::vector<attacks::Kind> catalog = opts.catalog;
  if (catalog.empty()) catalog = attacks::full_catalog();

  for (const auto& clip : corpus) {
    if (opts.max_clips > 0 && used >= opts.max_clips) break;
    const int seg_len = std::min(clip.length(), clip.sample_rate);  // 1-second protocol
    const audio::Waveform segment = crop_segment(clip, seg_len, rng);
    if (segment.length() < models.config().stft.win_length) continue;

    std::vector<int> bits(opts.payload_bits);
    for (int& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;

    const auto t0 = clock_type::now();
    codec::EmbedOptions eopts;
    eopts.seed = rng.next();
    eopts.mode = models.stage2_trained ? codec::SubstitutionMode::manipulator_argmax
                                       : codec::SubstitutionMode::random_parity;
    eopts.require_trained = !opts.oracle_codes;
    const codec::EmbedResult er = codec::embed(models, segment, bits, eopts);
    const auto t1 = clock_type::now();

    snr_sum += snr_db(segment, er.watermarked);
    ++used;

    // no-distortion entry plus every catalog kind
    std::vector<std::pair<std::string, attacks::DistortionSpec>> cases;
    attacks::DistortionSpec none_spec;
    cases.emplace_back("ND", none_spec);
    for (auto kind : catalog) {
      std::vector<attacks::Kind> single{kind};
      cases.emplace_back(attacks::kind_name(kind),
                         attacks::random_attack_spec(single, rng.next()));
    }

    double detect_seconds = 0.0;
    for (const auto& [name, spec] : cases) {
      double case_ber;
      if (opts.oracle_codes) {
        const std::vector<int> recovered =
            codec::read_parities(er.watermarked_codes.ids, er.plan.positions);
        case_ber = ber_aligned(bits, recovered);
      } else {
        audio::Waveform distorted;
        try {
          distorted = attacks::apply(er.watermarked, spec);
        } catch (const CodecUnavailableError&) {
          mp3_skipped = true;
          continue;
        }
        const auto d0 = clock_type::now();
        codec::DetectOptions dopts;
        dopts.expected_length = static_cast<int>(bits.size());
        const codec::DetectionReport det = codec::detect(models, distorted, dopts);
        const auto d1 = clock_type::now();
        if (name == "ND")
          detect_seconds += std::chrono::duration<double>(d1 - d0).count();
        case_ber = ber_aligned(bits, report_bits(det));
      }
      ber_sums[name] += case_ber;
      ber_counts[name] += 1;
    }

    wall_seconds += std::chrono::duration<double>(t1 - t0).count() + detect_seconds;
    audio_seconds += segment.duration_seconds();
  }

  if (used == 0) throw std::invalid_argument("no usable clips in the corpus");
  for (const auto& [k, v] : ber_sums) report.ber_by_distortion[k] = v / ber_counts[k];
  report.snr_db = snr_sum / used;
  report.bps = opts.payload_bits / 1.0;
  report.rtf = audio_seconds > 0 ? wall_seconds / audio_seconds : 0.0;
  report.clips = used;
  if (mp3_skipped) report.notes = "MP3 skipped: codec unavailable";

  if (!opts.output_dir.empty()) {
    fs::create_directories(opts.output_dir);
    write_text(opts.output_dir + "/information_hiding.json", report.to_json());
    write_text(opts.output_dir + "/ber_table.csv", report.ber_table_csv());
    std::vector<std::pair<double, double>> series;
    int i = 0;
    for (const auto& [k, v] : report.ber_by_distortion) series.emplace_back(i++, v);
    write_svg_plot(opts.output_dir + "/ber_by_distortion.svg", "BER by distortion", series,
                   "distortion index", "BER");
  }
  return report;
}

EvalReport run_ai_detection_eval(codec::Models& models,
                                 const std::vector<audio::Waveform>& corpus,
                                 const EvalOptions& opts) {
  if (corpus.empty()) throw std::invalid_argument("evaluation corpus is empty");
  if (!models.stage1_trained) throw MissingPrerequisiteError("trained models required");
  if (!models.calibration.valid())
    throw MissingPrerequisiteError("detector calibration required for the z-test");

  Rng rng(opts.seed);
  EvalReport report;
  int wm_hits = 0, clean_hits = 0, used = 0;
  double snr_sum = 0.0;
  double wall_seconds = 0.0, audio_seconds = 0.0;

  for (const auto& clip : corpus) {
    if (opts.max_clips > 0 && used >= opts.max_clips) break;
    if (clip.length() < models.config().stft.win_length) continue;
    const audio::Spectrogram spec = audio::stft(clip, models.config().stft);
    const int t_frames = spec.frames();
    const int payload =
        std::max(1, static_cast<int>(std::llround(opts.watermark_ratio * t_frames)));
    std::vector<int> bits(payload);
    for (int& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;

    const auto t0 = clock_type::now();
    codec::EmbedOptions eopts;
    eopts.seed = rng.next();
    eopts.mode = models.stage2_trained ? codec::SubstitutionMode::manipulator_argmax
                                       : codec::SubstitutionMode::random_parity;
    const codec::EmbedResult er = codec::embed(models, clip, bits, eopts);

    audio::Waveform attacked = er.watermarked;
    if (!opts.catalog.empty()) attacked = attacks::random_attack(attacked, opts.catalog, rng.next());

    const codec::DetectionReport wm_det = codec::detect(models, attacked);
    const auto t1 = clock_type::now();
    const codec::DetectionReport clean_det = codec::detect(models, clip);

    wm_hits += wm_det.verdict && wm_det.verdict->z > opts.z_threshold;
    clean_hits += clean_det.verdict && clean_det.verdict->z > opts.z_threshold;
    snr_sum += snr_db(clip, er.watermarked);
    wall_seconds += std::chrono::duration<double>(t1 - t0).count();
    audio_seconds += clip.duration_seconds();
    ++used;
  }
  if (used == 0) throw std::invalid_argument("no usable clips in the corpus");

  report.utterance_tpr = static_cast<double>(wm_hits) / used;
  report.utterance_fpr = static_cast<double>(clean_hits) / used;
  report.snr_db = snr_sum / used;
  report.rtf = audio_seconds > 0 ? wall_seconds / audio_seconds : 0.0;
  report.clips = used;

  // ratio sweep for the reliability/imperceptibility tradeoff
  const int sweep_clips = std::min<int>(used, 8);
  for (double ratio : opts.sweep_ratios) {
    double z_sum = 0.0, s_sum = 0.0;
    int n = 0;
    Rng sweep_rng = rng.fork(static_cast<uint64_t>(ratio * 1000));
    for (int i = 0; i < sweep_clips; ++i) {
      const auto& clip = corpus[i % corpus.size()];
      if (clip.length() < models.config().stft.win_length) continue;
      const audio::Spectrogram spec = audio::stft(clip, models.config().stft);
      const int payload =
          std::max(1, static_cast<int>(std::llround(ratio * spec.frames())));
      std::vector<int> bits(payload);
      for (int& b : bits) b = sweep_rng.bernoulli(0.5) ? 1 : 0;
      codec::EmbedOptions eopts;
      eopts.seed = sweep_rng.next();
      eopts.mode = models.stage2_trained ? codec::SubstitutionMode::manipulator_argmax
                                         : codec::SubstitutionMode::random_parity;
      const codec::EmbedResult er = codec::embed(models, clip, bits, eopts);
      const codec::DetectionReport det = codec::detect(models, er.watermarked);
      if (det.verdict) z_sum += det.verdict->z;
      s_sum += snr_db(clip, er.watermarked);
      ++n;
    }
    if (n > 0) report.ratio_sweep.push_back({ratio, z_sum / n, s_sum / n});
  }

  if (!opts.output_dir.empty()) {
    fs::create_directories(opts.output_dir);
    write_text(opts.output_dir + "/ai_detection.json", report.to_json());
    std::vector<std::pair<double, double>> z_series, snr_series;
    for (const auto& row : report.ratio_sweep) {
      z_series.emplace_back(row[0], row[1]);
      snr_series.emplace_back(row[0], row[2]);
    }
    write_svg_plot(opts.output_dir + "/z_vs_ratio.svg", "Z-statistic vs watermark ratio",
                   z_series, "watermark ratio", "z");
    write_svg_plot(opts.output_dir + "/snr_vs_ratio.svg", "SNR vs watermark ratio", snr_series,
                   "watermark ratio", "snr (dB)");
  }
  return report;
}

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::vector<std::pair<double, double>>& series,
                    const std::string& x_label, const std::string& y_label) {
  const int w = 640, h = 400, margin = 60;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!series.empty()) {
    xmin = xmax = series[0].first;
    ymin = ymax = series[0].second;
    for (const auto& [x, y] : series) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto sx = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (w - 2 * margin); };
  auto sy = [&](double y) { return h - margin - (y - ymin) / (ymax - ymin) * (h - 2 * margin); };

  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
     << "</text>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
     << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
     << h - margin << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"" << h - 16 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << x_label << " [" << xmin << ", " << xmax << "]</text>\n";
  os << "<text x=\"16\" y=\"" << h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
     << h / 2 << ")\" text-anchor=\"middle\">" << y_label << " [" << ymin << ", " << ymax
     << "]</text>\n";
  if (!series.empty()) {
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series) os << sx(x) << "," << sy(y) << " ";
    os << "\"/>\n";
    for (const auto& [x, y] : series)
      os << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  os << "</svg>\n";
  std::ofstream out(path);
  out << os.str();
}

}  // namespace codemark::metrics
