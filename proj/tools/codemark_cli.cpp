// tools/codemark_cli.cpp
// Command-line surface: corpus generation, two-stage training, embedding,
// detection, z-test, distortion, calibration and evaluation.
//
// Exit codes: 0 ok, 1 generic error, 2 missing prerequisite (checkpoint,
// config, sample-rate mismatch), 3 capacity exceeded, 4 external codec
// unavailable.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "codemark/attacks.hpp"
#include "codemark/audio.hpp"
#include "codemark/checkpoint.hpp"
#include "codemark/codec.hpp"
#include "codemark/errors.hpp"
#include "codemark/metrics.hpp"
#include "codemark/stats.hpp"
#include "codemark/train.hpp"

using namespace codemark;
using nlohmann::json;

namespace {

audio::Waveform load_input_wav(const std::string& path, int expected_rate, bool resample) {
  audio::Waveform w = audio::read_wav(path, resample ? expected_rate : 0);
  if (w.sample_rate != expected_rate)
    throw MissingPrerequisiteError("sample rate mismatch: input is " +
                                   std::to_string(w.sample_rate) + " Hz, checkpoint expects " +
                                   std::to_string(expected_rate) + " Hz (use --resample)");
  return w;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text << "\n";
}

std::vector<int> parse_positions(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"codemark: parity watermarks in discrete speech codes"};
  app.require_subcommand(1);

  // --- make-corpus ---
  auto* cmd_corpus = app.add_subcommand("make-corpus", "generate the synthetic training corpus");
  std::string corpus_out;
  int corpus_clips = 24;
  double corpus_seconds = 1.2;
  uint64_t corpus_seed = 7;
  int corpus_rate = audio::kDefaultSampleRate;
  cmd_corpus->add_option("--out", corpus_out, "output directory")->required();
  cmd_corpus->add_option("--clips", corpus_clips, "number of clips");
  cmd_corpus->add_option("--seconds", corpus_seconds, "clip length in seconds");
  cmd_corpus->add_option("--seed", corpus_seed, "generator seed");
  cmd_corpus->add_option("--rate", corpus_rate, "sample rate");

  // --- train ---
  auto* cmd_train = app.add_subcommand("train", "run one training stage");
  int train_stage = 1;
  std::string train_config, train_corpus, train_ckpt = "codemark.ckpt", train_metrics;
  int cfg_codebook = 128, cfg_code_dim = 128, cfg_hidden = 128;
  uint64_t model_seed = 1234;
  cmd_train->add_option("--stage", train_stage, "1 or 2")->required();
  cmd_train->add_option("--config", train_config, "training config JSON");
  cmd_train->add_option("--corpus", train_corpus, "directory of 24 kHz mono wavs")->required();
  cmd_train->add_option("--checkpoint", train_ckpt, "checkpoint path (in/out)");
  cmd_train->add_option("--metrics-out", train_metrics, "write the final metrics record here");
  cmd_train->add_option("--codebook-size", cfg_codebook, "stage 1: codebook entries");
  cmd_train->add_option("--code-dim", cfg_code_dim, "stage 1: code dimension");
  cmd_train->add_option("--hidden", cfg_hidden, "stage 1: hidden channels");
  cmd_train->add_option("--model-seed", model_seed, "stage 1: parameter init seed");

  // --- embed ---
  auto* cmd_embed = app.add_subcommand("embed", "hide bits in a waveform");
  std::string em_ckpt, em_in, em_out, em_bits, em_positions, em_plan, em_mode = "argmax";
  uint64_t em_seed = 0;
  int em_best_of = 1;
  bool em_resample = false;
  cmd_embed->add_option("--checkpoint", em_ckpt)->required();
  cmd_embed->add_option("--in", em_in, "input wav")->required();
  cmd_embed->add_option("--out", em_out, "watermarked wav")->required();
  cmd_embed->add_option("--bits", em_bits, "payload as 0/1 text or 0x-prefixed hex")->required();
  cmd_embed->add_option("--positions", em_positions, "comma-separated frame indices");
  cmd_embed->add_option("--plan", em_plan, "write the watermark plan JSON here");
  cmd_embed->add_option("--seed", em_seed);
  cmd_embed->add_option("--mode", em_mode, "argmax | temperature | random");
  cmd_embed->add_option("--best-of", em_best_of, "candidate position sets to try");
  cmd_embed->add_flag("--resample", em_resample, "resample non-matching inputs on load");

  // --- detect ---
  auto* cmd_detect = app.add_subcommand("detect", "recover bits from a waveform");
  std::string de_ckpt, de_in, de_report;
  int de_expected = 0;
  double de_threshold = 0.5;
  bool de_resample = false;
  cmd_detect->add_option("--checkpoint", de_ckpt)->required();
  cmd_detect->add_option("--in", de_in)->required();
  cmd_detect->add_option("--expected-length", de_expected, "payload length, if known");
  cmd_detect->add_option("--threshold", de_threshold, "localization threshold");
  cmd_detect->add_option("--report", de_report, "write the detection report JSON here");
  cmd_detect->add_flag("--resample", de_resample);

  // --- ztest ---
  auto* cmd_ztest = app.add_subcommand("ztest", "utterance-level watermark decision");
  std::string zt_ckpt, zt_in;
  double zt_threshold = 4.0;
  bool zt_resample = false;
  cmd_ztest->add_option("--checkpoint", zt_ckpt)->required();
  cmd_ztest->add_option("--in", zt_in)->required();
  cmd_ztest->add_option("--threshold", zt_threshold, "z threshold");
  cmd_ztest->add_flag("--resample", zt_resample);

  // --- attack ---
  auto* cmd_attack = app.add_subcommand("attack", "apply one distortion");
  std::string at_in, at_out, at_kind = "GN", at_spec_out;
  uint64_t at_seed = 0;
  int at_rate = audio::kDefaultSampleRate;
  bool at_resample = false;
  cmd_attack->add_option("--in", at_in)->required();
  cmd_attack->add_option("--out", at_out)->required();
  cmd_attack->add_option("--kind", at_kind, "NONE GN AS RS MP3 MF LP EA QTZ SS PN");
  cmd_attack->add_option("--seed", at_seed);
  cmd_attack->add_option("--rate", at_rate, "expected sample rate");
  cmd_attack->add_option("--spec-out", at_spec_out, "write the distortion spec JSON here");
  cmd_attack->add_flag("--resample", at_resample);

  // --- calibrate ---
  auto* cmd_cal = app.add_subcommand("calibrate", "measure detector alpha/beta on a corpus");
  std::string ca_ckpt, ca_corpus;
  double ca_ratio = 0.1, ca_threshold = 0.5;
  uint64_t ca_seed = 99;
  cmd_cal->add_option("--checkpoint", ca_ckpt)->required();
  cmd_cal->add_option("--corpus", ca_corpus)->required();
  cmd_cal->add_option("--ratio", ca_ratio, "watermark ratio used for alpha");
  cmd_cal->add_option("--threshold", ca_threshold);
  cmd_cal->add_option("--seed", ca_seed);

  // --- evaluate ---
  auto* cmd_eval = app.add_subcommand("evaluate", "run an experiment harness");
  std::string ev_ckpt, ev_corpus, ev_mode = "hiding", ev_out = "eval_out";
  int ev_bits = 32, ev_clips = 0;
  double ev_ratio = 0.1;
  uint64_t ev_seed = 1;
  bool ev_oracle = false;
  cmd_eval->add_option("--checkpoint", ev_ckpt)->required();
  cmd_eval->add_option("--corpus", ev_corpus)->required();
  cmd_eval->add_option("--mode", ev_mode, "hiding | aidetect");
  cmd_eval->add_option("--out", ev_out, "output directory");
  cmd_eval->add_option("--bits", ev_bits, "payload bits per 1 s segment");
  cmd_eval->add_option("--ratio", ev_ratio, "watermark ratio (aidetect)");
  cmd_eval->add_option("--clips", ev_clips, "cap the clip count (0 = all)");
  cmd_eval->add_option("--seed", ev_seed);
  cmd_eval->add_flag("--oracle", ev_oracle, "bypass audio, read parities from codes");

  CLI11_PARSE(app, argc, argv);

  if (cmd_corpus->parsed()) {
    const auto corpus = train::synth_corpus(corpus_clips, corpus_seconds, corpus_rate, corpus_seed);
    train::write_corpus_dir(corpus_out, corpus);
    std::cout << "wrote " << corpus.size() << " clips to " << corpus_out << "\n";
    return 0;
  }

  if (cmd_train->parsed()) {
    train::TrainConfig tcfg;
    if (!train_config.empty()) tcfg = train::TrainConfig::from_json_file(train_config);
    json metrics;
    std::unique_ptr<codec::Models> models;
    if (train_stage == 1) {
      const auto corpus = train::load_corpus_dir(train_corpus, audio::kDefaultSampleRate);
      codec::ModelsConfig mcfg;
      mcfg.vq.codebook_size = cfg_codebook;
      mcfg.vq.code_dim = cfg_code_dim;
      mcfg.vq.hidden = cfg_hidden;
      mcfg.manip.codebook_size = cfg_codebook;
      models = std::make_unique<codec::Models>(mcfg, model_seed);
      const train::Stage1Result r = train::train_stage1(*models, corpus, tcfg);
      train::calibrate(*models, corpus, 0.1, 0.5, tcfg.seed ^ 0xCA11Bu,
                       codec::SubstitutionMode::random_parity, train_corpus);
      metrics["stage"] = 1;
      metrics["final_total"] = r.final_total;
      metrics["restorer_parity_accuracy"] = r.restorer_parity_accuracy;
      metrics["alpha"] = models->calibration.alpha;
      metrics["beta"] = models->calibration.beta;
    } else if (train_stage == 2) {
      models = checkpoint::load(train_ckpt);
      if (!models->stage1_trained)
        throw MissingPrerequisiteError("stage-1 checkpoint required");
      const auto corpus = train::load_corpus_dir(train_corpus, audio::kDefaultSampleRate);
      const train::Stage2Result r = train::train_stage2(*models, corpus, tcfg);
      metrics["stage"] = 2;
      metrics["masked_accuracy"] = r.masked_accuracy;
      metrics["marginal_baseline"] = r.marginal_baseline;
    } else {
      throw std::invalid_argument("--stage must be 1 or 2");
    }
    checkpoint::save(*models, train_ckpt);
    metrics["checkpoint_hash"] = models->store().value_hash();
    metrics["seed"] = tcfg.seed;
    std::cout << metrics.dump() << "\n";
    if (!train_metrics.empty()) write_text_file(train_metrics, metrics.dump());
    return 0;
  }

  if (cmd_embed->parsed()) {
    auto models = checkpoint::load(em_ckpt);
    const audio::Waveform wave = load_input_wav(em_in, models->config().sample_rate, em_resample);
    const std::vector<int> bits = codec::parse_bits(em_bits);
    codec::EmbedOptions opts;
    opts.seed = em_seed;
    if (!em_positions.empty()) opts.positions = parse_positions(em_positions);
    if (em_mode == "argmax") opts.mode = codec::SubstitutionMode::manipulator_argmax;
    else if (em_mode == "temperature") opts.mode = codec::SubstitutionMode::manipulator_temperature;
    else if (em_mode == "random") opts.mode = codec::SubstitutionMode::random_parity;
    else throw std::invalid_argument("unknown embed mode: " + em_mode);

    codec::EmbedResult result;
    if (em_best_of > 1) {
      metrics::BestOfNResult best =
          metrics::select_positions_best_of_n(*models, wave, bits, em_best_of, em_seed, opts.mode);
      result = std::move(best.best);
    } else {
      result = codec::embed(*models, wave, bits, opts);
    }
    audio::Waveform out = result.watermarked;
    for (double& s : out.samples) s = std::clamp(s, -1.0, 1.0);
    audio::write_wav(em_out, out);
    if (!em_plan.empty()) write_text_file(em_plan, result.plan.to_json());
    std::cout << "{\"payload_bits\":" << bits.size() << ",\"positions\":"
              << result.plan.positions.size() << ",\"substituted\":" << result.substituted
              << ",\"snr_db\":" << metrics::snr_db(wave, result.watermarked) << "}\n";
    return 0;
  }

  if (cmd_detect->parsed()) {
    auto models = checkpoint::load(de_ckpt);
    const audio::Waveform wave = load_input_wav(de_in, models->config().sample_rate, de_resample);
    codec::DetectOptions opts;
    opts.threshold = de_threshold;
    if (de_expected > 0) opts.expected_length = de_expected;
    const codec::DetectionReport report = codec::detect(*models, wave, opts);
    std::cout << "bits: " << report.bits << "\n";
    std::cout << report.to_json() << "\n";
    if (!de_report.empty()) write_text_file(de_report, report.to_json());
    return 0;
  }

  if (cmd_ztest->parsed()) {
    auto models = checkpoint::load(zt_ckpt);
    if (!models->calibration.valid())
      throw MissingPrerequisiteError("checkpoint carries no detector calibration (run calibrate)");
    const audio::Waveform wave = load_input_wav(zt_in, models->config().sample_rate, zt_resample);
    const audio::Spectrogram spec = audio::stft(wave, models->config().stft);
    const codec::LocalizerOutput loc =
        codec::localizer_forward(*models, spec.magnitude, models->calibration.threshold);
    const stats::DetectionVerdict verdict =
        stats::make_verdict(static_cast<int>(loc.detected.size()), spec.frames(),
                            models->calibration.beta, zt_threshold);
    std::cout << verdict.to_json() << "\n";
    return 0;
  }

  if (cmd_attack->parsed()) {
    const audio::Waveform wave = load_input_wav(at_in, at_rate, at_resample);
    const auto kind = attacks::kind_from_name(at_kind);
    if (!kind) throw std::invalid_argument("unknown distortion kind: " + at_kind);
    const attacks::DistortionSpec spec = attacks::random_attack_spec({*kind}, at_seed);
    audio::Waveform out = attacks::apply(wave, spec);
    for (double& s : out.samples) s = std::clamp(s, -1.0, 1.0);
    audio::write_wav(at_out, out);
    if (!at_spec_out.empty()) write_text_file(at_spec_out, spec.to_json());
    std::cout << spec.to_json() << "\n";
    return 0;
  }

  if (cmd_cal->parsed()) {
    auto models = checkpoint::load(ca_ckpt);
    const auto corpus = train::load_corpus_dir(ca_corpus, models->config().sample_rate);
    const auto mode = models->stage2_trained ? codec::SubstitutionMode::manipulator_argmax
                                             : codec::SubstitutionMode::random_parity;
    const stats::DetectorCalibration cal =
        train::calibrate(*models, corpus, ca_ratio, ca_threshold, ca_seed, mode, ca_corpus);
    checkpoint::save(*models, ca_ckpt);
    std::cout << "{\"alpha\":" << cal.alpha << ",\"beta\":" << cal.beta
              << ",\"threshold\":" << cal.threshold << "}\n";
    return 0;
  }

  if (cmd_eval->parsed()) {
    auto models = checkpoint::load(ev_ckpt);
    const auto corpus = train::load_corpus_dir(ev_corpus, models->config().sample_rate);
    metrics::EvalOptions opts;
    opts.payload_bits = ev_bits;
    opts.watermark_ratio = ev_ratio;
    opts.seed = ev_seed;
    opts.max_clips = ev_clips;
    opts.oracle_codes = ev_oracle;
    opts.output_dir = ev_out;
    metrics::EvalReport report;
    if (ev_mode == "hiding")
      report = metrics::run_information_hiding_eval(*models, corpus, opts);
    else if (ev_mode == "aidetect")
      report = metrics::run_ai_detection_eval(*models, corpus, opts);
    else
      throw std::invalid_argument("unknown evaluate mode: " + ev_mode);
    std::cout << report.to_json() << "\n";
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const CodecUnavailableError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const MissingPrerequisiteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
