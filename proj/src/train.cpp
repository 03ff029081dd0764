// src/train.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "codemark/errors.hpp"

namespace codemark::train {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (stage1_steps < 1 || stage2_steps < 1 || batch_size < 1)
    throw std::invalid_argument("step and batch counts must be positive");
  if (!(gamma_min > 0.0 && gamma_max <= 0.5 && gamma_min <= gamma_max))
    throw std::invalid_argument("mask ratio range must lie within (0, 0.5]");
  if (lambda_adv < 0.0 || lambda_res_first < 0.0 || lambda_res_second < 0.0)
    throw std::invalid_argument("loss weights must be non-negative");
  if (clip_seconds <= 0.0) throw std::invalid_argument("clip length must be positive");
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingPrerequisiteError("cannot open training config: " + path);
  json j = json::parse(in);
  TrainConfig cfg;
  cfg.stage1_steps = j.value("stage1_steps", cfg.stage1_steps);
  cfg.stage2_steps = j.value("stage2_steps", cfg.stage2_steps);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.peak_lr = j.value("peak_lr", cfg.peak_lr);
  cfg.warmup_steps = j.value("warmup_steps", cfg.warmup_steps);
  cfg.lambda_adv = j.value("lambda_adv", cfg.lambda_adv);
  cfg.lambda_res_first = j.value("lambda_res_first", cfg.lambda_res_first);
  cfg.lambda_res_second = j.value("lambda_res_second", cfg.lambda_res_second);
  cfg.gamma_min = j.value("gamma_min", cfg.gamma_min);
  cfg.gamma_max = j.value("gamma_max", cfg.gamma_max);
  cfg.clip_seconds = j.value("clip_seconds", cfg.clip_seconds);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.log_every = j.value("log_every", cfg.log_every);
  cfg.log_path = j.value("log_path", cfg.log_path);
  if (j.contains("catalog")) {
    cfg.catalog.clear();
    for (const auto& name : j["catalog"]) {
      const auto kind = attacks::kind_from_name(name.get<std::string>());
      if (!kind) throw std::invalid_argument("unknown distortion kind in config");
      cfg.catalog.push_back(*kind);
    }
  }
  cfg.validate();
  return cfg;
}

std::string TrainConfig::to_json() const {
  json j;
  j["stage1_steps"] = stage1_steps;
  j["stage2_steps"] = stage2_steps;
  j["batch_size"] = batch_size;
  j["peak_lr"] = peak_lr;
  j["warmup_steps"] = warmup_steps;
  j["lambda_adv"] = lambda_adv;
  j["lambda_res_first"] = lambda_res_first;
  j["lambda_res_second"] = lambda_res_second;
  j["gamma_min"] = gamma_min;
  j["gamma_max"] = gamma_max;
  j["clip_seconds"] = clip_seconds;
  j["seed"] = seed;
  j["log_every"] = log_every;
  std::vector<std::string> names;
  for (auto k : catalog) names.push_back(attacks::kind_name(k));
  j["catalog"] = names;
  return j.dump();
}

std::string StepRecord::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\"step\":" << step << ",\"total\":" << total << ",\"loc\":" << loc
     << ",\"res\":" << res << ",\"rec\":" << rec << ",\"code\":" << code << ",\"adv\":" << adv
     << ",\"lambda_res\":" << lambda_res << ",\"lr\":" << lr << ",\"gamma\":" << gamma << "}";
  return os.str();
}

// --- corpus -----------------------------------------------------------------

namespace {

// two-pole resonator, Klatt-style parallel formant bank
void resonate(const std::vector<double>& x, double freq, double bw, int rate, double gain,
              std::vector<double>& acc) {
  const double r = std::exp(-3.14159265358979323846 * bw / rate);
  const double theta = 2.0 * 3.14159265358979323846 * freq / rate;
  const double a1 = 2.0 * r * std::cos(theta);
  const double a2 = -r * r;
  const double scale = (1.0 - r) * gain;
  double y1 = 0.0, y2 = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double y = scale * x[i] + a1 * y1 + a2 * y2;
    acc[i] += y;
    y2 = y1;
    y1 = y;
  }
}

}  // namespace

namespace {

// Ornstein-Uhlenbeck step: mean-reverting noise with time constant tau_s.
double ou_step(double x, double mu, double tau_s, double sigma, double dt, Rng& rng) {
  const double a = dt / tau_s;
  return x + (mu - x) * a + sigma * std::sqrt(2.0 * a) * rng.normal();
}

}  // namespace

audio::Waveform synth_speech(double seconds, int sample_rate, uint64_t seed) {
  const int n = std::max(1, static_cast<int>(std::llround(seconds * sample_rate)));
  const double dt = 1.0 / sample_rate;
  Rng rng(seed);
  const double f0_base = rng.uniform(90.0, 200.0);
  const double vib_rate = rng.uniform(4.0, 7.0);
  const double vib_phase = rng.uniform(0.0, 6.28318);
  const double syll_rate = rng.uniform(1.8, 3.2);
  const double syll_phase = rng.uniform(0.0, 6.28318);
  const double f1_anchor = rng.uniform(300.0, 900.0);
  const double f2_anchor = rng.uniform(1000.0, 2200.0);
  const double f3_anchor = rng.uniform(2400.0, 3400.0);

  const int harmonics = std::max(3, std::min(36, static_cast<int>(0.4 * sample_rate / (1.3 * f0_base))));

  // glottal jitter/shimmer and wandering formants make neighboring frames
  // carry independent fine structure, so masked frames are not inferable
  // from context alone
  double jitter = 0.0;          // relative f0 deviation, ~8 ms time constant
  double shimmer = 0.0;         // log-amplitude deviation, ~12 ms
  double aspiration = 0.05;     // noise mix, ~80 ms
  double f1 = f1_anchor, f2 = f2_anchor, f3 = f3_anchor;

  std::vector<double> excitation(n, 0.0);
  std::vector<double> noise_exc(n, 0.0);
  double phase = rng.uniform(0.0, 6.28318);
  for (int i = 0; i < n; ++i) {
    const double t = i * dt;
    jitter = ou_step(jitter, 0.0, 0.008, 0.025, dt, rng);
    shimmer = ou_step(shimmer, 0.0, 0.012, 0.35, dt, rng);
    aspiration = std::clamp(ou_step(aspiration, 0.06, 0.08, 0.04, dt, rng), 0.01, 0.2);
    const double vibrato = 0.02 * std::sin(2.0 * 3.14159265 * vib_rate * t + vib_phase);
    const double f0 = f0_base * (1.0 + vibrato + jitter);
    phase += 2.0 * 3.14159265358979323846 * f0 * dt;
    double s = 0.0;
    for (int h = 1; h <= harmonics; ++h) s += std::sin(h * phase) / h;
    excitation[i] = s * std::exp(shimmer);
    noise_exc[i] = rng.normal() * aspiration;
  }

  // consonant-like bursts: short wideband noise events
  const int bursts = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(3 * seconds) + 1));
  for (int b = 0; b < bursts; ++b) {
    const int at = static_cast<int>(rng.uniform_int(std::max(1, n - 1)));
    const int len = static_cast<int>(rng.uniform(0.02, 0.06) * sample_rate);
    const double gain = rng.uniform(0.8, 1.8);
    for (int i = at; i < std::min(n, at + len); ++i) {
      const double ramp = std::sin(3.14159265 * (i - at) / std::max(1, len));
      noise_exc[i] += gain * ramp * rng.normal();
    }
  }

  std::vector<double> source(n);
  for (int i = 0; i < n; ++i) source[i] = excitation[i] + noise_exc[i];

  std::vector<double> voiced(n, 0.0);
  std::vector<double> f1_traj(n), f2_traj(n), f3_traj(n);
  for (int i = 0; i < n; ++i) {
    f1 = ou_step(f1, f1_anchor, 0.06, 60.0, dt, rng);
    f2 = ou_step(f2, f2_anchor, 0.06, 120.0, dt, rng);
    f3 = ou_step(f3, f3_anchor, 0.06, 150.0, dt, rng);
    f1_traj[i] = std::clamp(f1, 200.0, 1100.0);
    f2_traj[i] = std::clamp(f2, 800.0, 2600.0);
    f3_traj[i] = std::clamp(f3, 2000.0, 3900.0);
  }
  // time-varying two-pole resonators, Klatt-style parallel bank
  struct Res {
    double y1 = 0.0, y2 = 0.0;
  };
  Res r1, r2, r3;
  const double kpi = 3.14159265358979323846;
  for (int i = 0; i < n; ++i) {
    auto apply = [&](Res& r, double freq, double bw, double gain) {
      const double radius = std::exp(-kpi * bw * dt);
      const double a1 = 2.0 * radius * std::cos(2.0 * kpi * freq * dt);
      const double a2 = -radius * radius;
      const double y = (1.0 - radius) * gain * source[i] + a1 * r.y1 + a2 * r.y2;
      r.y2 = r.y1;
      r.y1 = y;
      return y;
    };
    voiced[i] = apply(r1, f1_traj[i], 90.0, 1.0) + apply(r2, f2_traj[i], 130.0, 0.7) +
                apply(r3, f3_traj[i], 180.0, 0.4);
  }

  audio::Waveform wave;
  wave.sample_rate = sample_rate;
  wave.samples.resize(n);
  double peak = 1e-9;
  for (int i = 0; i < n; ++i) {
    const double t = i * dt;
    const double env =
        0.15 + 0.85 * std::pow(std::max(0.0, std::sin(2.0 * kpi * syll_rate * t + syll_phase)), 0.8);
    wave.samples[i] = voiced[i] * env;
    peak = std::max(peak, std::abs(wave.samples[i]));
  }
  const double norm = 0.5 / peak;
  for (double& v : wave.samples) v *= norm;
  return wave;
}

std::vector<audio::Waveform> synth_corpus(int clips, double seconds, int sample_rate,
                                          uint64_t seed) {
  Rng rng(seed);
  std::vector<audio::Waveform> corpus;
  corpus.reserve(clips);
  for (int i = 0; i < clips; ++i) corpus.push_back(synth_speech(seconds, sample_rate, rng.next()));
  return corpus;
}

void write_corpus_dir(const std::string& dir, const std::vector<audio::Waveform>& corpus) {
  fs::create_directories(dir);
  for (size_t i = 0; i < corpus.size(); ++i) {
    std::ostringstream name;
    name << dir << "/clip_" << i / 1000 << (i / 100) % 10 << (i / 10) % 10 << i % 10 << ".wav";
    audio::write_wav(name.str(), corpus[i]);
  }
}

std::vector<audio::Waveform> load_corpus_dir(const std::string& dir, int sample_rate) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  std::vector<audio::Waveform> corpus;
  for (const auto& p : paths) corpus.push_back(audio::read_wav(p, sample_rate));
  if (corpus.empty()) throw std::invalid_argument("no wav files in corpus directory: " + dir);
  return corpus;
}

// --- stage 1 -----------------------------------------------------------------

namespace {

audio::Waveform random_crop(const audio::Waveform& wave, int len, Rng& rng) {
  if (wave.length() <= len) return wave;
  const int off = static_cast<int>(rng.uniform_int(wave.length() - len + 1));
  audio::Waveform out;
  out.sample_rate = wave.sample_rate;
  out.samples.assign(wave.samples.begin() + off, wave.samples.begin() + off + len);
  return out;
}

struct ItemLosses {
  double loc = 0, res = 0, rec = 0, code = 0, adv = 0, total = 0;
};

ItemLosses run_stage1_item(codec::Models& models, const audio::Waveform& wave, double gamma,
                           uint64_t mask_seed, uint64_t attack_seed,
                           const std::vector<attacks::Kind>& catalog, double lambda_res,
                           double lambda_adv, vq::AdversarialLoss* adversary,
                           std::vector<int>* batch_ids, Tensor* recent, int* recent_pos,
                           int* recent_filled, Rng& recent_rng) {
  const auto& mcfg = models.config();
  const audio::Spectrogram spec = audio::stft(wave, mcfg.stft);
  const int t_frames = spec.frames();
  const audio::FrameMask mask = audio::sample_mask(t_frames, gamma, mask_seed);

  ad::Tape tape;
  nn::TapeBinding bind(tape);
  const Tensor compressed = vq::compress_magnitude(spec.magnitude);
  const int comp_const = tape.constant(compressed);
  const int z_e = models.vq().encode_node(tape, bind, comp_const);
  const Tensor& z_val = tape.val(z_e);

  const vq::QuantizeResult q = vq::quantize(z_val, models.vq().codebook());
  if (batch_ids) batch_ids->insert(batch_ids->end(), q.codes.ids.begin(), q.codes.ids.end());
  if (recent) {
    for (int s = 0; s < 4; ++s) {
      const int row = static_cast<int>(recent_rng.uniform_int(t_frames));
      std::copy(z_val.row(row), z_val.row(row) + z_val.cols, recent->row(*recent_pos));
      *recent_pos = (*recent_pos + 1) % recent->rows;
      *recent_filled = std::min(recent->rows, *recent_filled + 1);
    }
  }

  const int cb_node = bind.node(models.vq().codebook_param());
  const int e_sel = tape.embedding(cb_node, q.codes.ids);
  const int l_codebook = tape.mse(e_sel, tape.constant(z_val));
  const int l_commit = tape.mse(z_e, tape.constant(q.codes.vectors));

  Tensor offset = q.codes.vectors;
  for (size_t i = 0; i < offset.data.size(); ++i) offset.data[i] -= z_val.data[i];
  const int zq_st = tape.add_const_offset(z_e, std::move(offset));

  std::vector<double> on(t_frames), off_w(t_frames);
  for (int t = 0; t < t_frames; ++t) {
    on[t] = mask.flags[t] ? 1.0 : 0.0;
    off_w[t] = 1.0 - on[t];
  }
  const int gated_codes = tape.row_scale(zq_st, on);
  const int gated_mag = tape.row_scale(comp_const, off_w);
  const int s_gen = models.vq().decode_node(tape, bind, gated_codes, gated_mag);
  const int s_bar = tape.mix_rows(s_gen, spec.magnitude, mask.flags);
  const int y_hat = tape.istft_fixed_phase(s_bar, spec.phase, mcfg.stft, wave.length());

  const attacks::DistortionSpec att = attacks::random_attack_spec(catalog, attack_seed);
  const int y_tilde = tape.distort(y_hat, att, wave.sample_rate);
  const int s_tilde = tape.stft_magnitude(y_tilde, mcfg.stft);
  const int comp_tilde = tape.log_eps(s_tilde, 1.0);  // log1p

  const int loc_logits = models.localizer().forward(tape, bind, comp_tilde);
  std::vector<double> loc_targets(t_frames), ones(t_frames, 1.0), res_weights(t_frames);
  std::vector<double> parity(t_frames);
  for (int t = 0; t < t_frames; ++t) {
    loc_targets[t] = mask.flags[t] ? 1.0 : 0.0;
    res_weights[t] = loc_targets[t];
    parity[t] = static_cast<double>(q.codes.ids[t] & 1);
  }
  const int l_loc = tape.bce_logits_rows(loc_logits, loc_targets, ones);
  const int res_logits = models.restorer().forward(tape, bind, comp_tilde);
  const int l_res = tape.bce_logits_rows(res_logits, parity, res_weights);
  const int l_rec = vq::multi_res_stft_loss_node(tape, y_hat, wave);

  int l_adv;
  if (adversary && adversary->enabled()) {
    Tensor grad(tape.val(s_gen).rows, tape.val(s_gen).cols);
    const double v = adversary->loss_and_grad(tape.val(s_gen), &grad);
    l_adv = tape.external_scalar(s_gen, v, std::move(grad));
  } else {
    l_adv = tape.constant(Tensor(1, 1, 0.0));
  }

  const int l_code = tape.s_add(l_codebook, tape.s_scale(l_commit, vq::kCommitmentCoefficient));
  int total = tape.s_add(l_loc, tape.s_scale(l_res, lambda_res));
  total = tape.s_add(total, l_rec);
  total = tape.s_add(total, l_code);
  total = tape.s_add(total, tape.s_scale(l_adv, lambda_adv));

  tape.backward(total);
  bind.flush_grads();

  ItemLosses out;
  out.loc = tape.val(l_loc).at(0, 0);
  out.res = tape.val(l_res).at(0, 0);
  out.rec = tape.val(l_rec).at(0, 0);
  out.code = tape.val(l_code).at(0, 0);
  out.adv = tape.val(l_adv).at(0, 0);
  out.total = tape.val(total).at(0, 0);
  return out;
}

double eval_restorer_parity_accuracy(codec::Models& models,
                                     const std::vector<audio::Waveform>& corpus, int clip_len,
                                     Rng rng, int clips = 8) {
  const auto& mcfg = models.config();
  long correct = 0, counted = 0;
  for (int i = 0; i < clips; ++i) {
    const auto& src = corpus[rng.uniform_int(corpus.size())];
    const audio::Waveform wave = random_crop(src, clip_len, rng);
    const audio::Spectrogram spec = audio::stft(wave, mcfg.stft);
    const int t_frames = spec.frames();
    const audio::FrameMask mask = audio::sample_mask(t_frames, 0.3, rng.next());
    const Tensor latents = models.vq().encode(spec.magnitude);
    const vq::QuantizeResult q = vq::quantize(latents, models.vq().codebook());
    const Tensor s_bar = models.vq().masked_decode(q.codes, spec.magnitude, mask);
    audio::Spectrogram recon = spec;
    recon.magnitude = s_bar;
    const audio::Waveform y_hat = audio::istft(recon);
    const audio::Spectrogram round = audio::stft(y_hat, mcfg.stft);
    const codec::RestorerOutput res = codec::restorer_forward(models, round.magnitude);
    for (int t = 0; t < t_frames; ++t) {
      if (!mask.flags[t]) continue;
      const int predicted = res.parity_probs[t] > 0.5 ? 1 : 0;
      correct += predicted == (q.codes.ids[t] & 1);
      ++counted;
    }
  }
  return counted ? static_cast<double>(correct) / counted : 0.0;
}

}  // namespace

Stage1Result train_stage1(codec::Models& models, const std::vector<audio::Waveform>& corpus,
                          const TrainConfig& cfg, vq::AdversarialLoss* adversary) {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("training corpus is empty");
  const auto& mcfg = models.config();
  const int clip_len = std::max(mcfg.stft.win_length,
                                static_cast<int>(std::llround(cfg.clip_seconds * mcfg.sample_rate)));

  std::vector<attacks::Kind> catalog = cfg.catalog;
  if (std::find(catalog.begin(), catalog.end(), attacks::Kind::mp3) != catalog.end() &&
      !attacks::mp3_codec_available()) {
    catalog.erase(std::remove(catalog.begin(), catalog.end(), attacks::Kind::mp3), catalog.end());
    std::cerr << "[train] mp3 codec unavailable; dropped MP3 from the distortion catalog\n";
  }
  if (catalog.empty()) catalog.push_back(attacks::Kind::none);

  auto stage1_params = nn::params_with_prefix(models.store(), "manip.", /*invert=*/true);
  nn::AdamConfig adam;
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;
  adam.epsilon = cfg.adam_epsilon;

  Rng root(cfg.seed);
  Rng recent_rng = root.fork(101);
  Rng reinit_rng = root.fork(102);
  Tensor recent(512, models.vq().codebook().dim());
  int recent_pos = 0, recent_filled = 0;

  std::ofstream log_out;
  if (!cfg.log_path.empty()) log_out.open(cfg.log_path, std::ios::app);

  Stage1Result result;
  const int midpoint = cfg.stage1_steps / 2;
  for (int step = 1; step <= cfg.stage1_steps; ++step) {
    const double lambda_res = step <= midpoint ? cfg.lambda_res_first : cfg.lambda_res_second;
    models.store().zero_grads();
    ItemLosses sums;
    std::vector<int> batch_ids;
    double gamma_logged = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      Rng item = root.fork(static_cast<uint64_t>(b));
      const auto& src = corpus[item.uniform_int(corpus.size())];
      const audio::Waveform wave = random_crop(src, clip_len, item);
      const double gamma = item.uniform(cfg.gamma_min, cfg.gamma_max);
      gamma_logged = gamma;
      const ItemLosses l = run_stage1_item(models, wave, gamma, item.next(), item.next(),
                                           catalog, lambda_res, cfg.lambda_adv, adversary,
                                           &batch_ids, &recent, &recent_pos, &recent_filled,
                                           recent_rng);
      sums.loc += l.loc;
      sums.res += l.res;
      sums.rec += l.rec;
      sums.code += l.code;
      sums.adv += l.adv;
      sums.total += l.total;
    }
    const double inv_b = 1.0 / cfg.batch_size;
    for (auto* p : stage1_params) p->grad *= inv_b;
    adam.lr = nn::warmup_inv_sqrt_lr(cfg.peak_lr, cfg.warmup_steps, step);
    nn::adam_step(stage1_params, adam, step);
    models.vq().sync_codebook_struct();

    vq::update_usage(models.vq().codebook(), batch_ids, 0.99);
    if (recent_filled > 0) {
      Tensor pool(recent_filled, recent.cols);
      std::copy(recent.data.begin(),
                recent.data.begin() + static_cast<size_t>(recent_filled) * recent.cols,
                pool.data.begin());
      const auto revived = vq::reinit_dead_codes_ids(models.vq().codebook(), pool, reinit_rng);
      if (!revived.empty()) {
        models.vq().sync_codebook_param();
        nn::Parameter* cb = models.vq().codebook_param();
        for (int id : revived) {
          std::fill(cb->adam_m.row(id), cb->adam_m.row(id) + cb->adam_m.cols, 0.0);
          std::fill(cb->adam_v.row(id), cb->adam_v.row(id) + cb->adam_v.cols, 0.0);
        }
      }
    }

    StepRecord rec;
    rec.step = step;
    rec.loc = sums.loc * inv_b;
    rec.res = sums.res * inv_b;
    rec.rec = sums.rec * inv_b;
    rec.code = sums.code * inv_b;
    rec.adv = sums.adv * inv_b;
    rec.lambda_res = lambda_res;
    rec.lr = adam.lr;
    rec.gamma = gamma_logged;
    rec.total = rec.loc + lambda_res * rec.res + rec.rec + rec.code + cfg.lambda_adv * rec.adv;
    if (!std::isfinite(rec.total)) {
      std::ostringstream os;
      os << "training diverged: loss is not finite at step " << step;
      throw std::runtime_error(os.str());
    }
    result.final_total = rec.total;
    if (step % cfg.log_every == 0 || step == 1 || step == cfg.stage1_steps) {
      result.log.push_back(rec);
      if (log_out) log_out << rec.to_json() << "\n";
    }
  }

  models.stage1_trained = true;
  result.restorer_parity_accuracy =
      eval_restorer_parity_accuracy(models, corpus, clip_len, root.fork(103));
  return result;
}

// --- stage 2 -----------------------------------------------------------------

Stage2Result train_stage2_tokens(codec::Models& models, const TokenProvider& provider,
                                 const TrainConfig& cfg) {
  cfg.validate();
  auto manip_params = nn::params_with_prefix(models.store(), "manip.");
  nn::AdamConfig adam;
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;
  adam.epsilon = cfg.adam_epsilon;

  Rng root(cfg.seed ^ 0x5747a2f6u);
  std::ofstream log_out;
  if (!cfg.log_path.empty()) log_out.open(cfg.log_path, std::ios::app);

  Stage2Result result;
  for (int step = 1; step <= cfg.stage2_steps; ++step) {
    models.store().zero_grads();
    double loss_sum = 0.0, gamma_logged = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      Rng item = root.fork(static_cast<uint64_t>(b));
      const std::vector<int> ids = provider(item);
      const int t_frames = static_cast<int>(ids.size());
      const double gamma = item.uniform(cfg.gamma_min, cfg.gamma_max);
      gamma_logged = gamma;
      const audio::FrameMask mask = audio::sample_mask(t_frames, gamma, item.next());
      std::vector<double> weights(t_frames);
      for (int t = 0; t < t_frames; ++t) weights[t] = mask.flags[t] ? 1.0 : 0.0;

      ad::Tape tape;
      nn::TapeBinding bind(tape);
      const int logits = models.manip().forward_node(tape, bind, ids, mask);
      const int loss = tape.cross_entropy_rows(logits, ids, weights);
      tape.backward(loss);
      bind.flush_grads();
      loss_sum += tape.val(loss).at(0, 0);
    }
    const double inv_b = 1.0 / cfg.batch_size;
    for (auto* p : manip_params) p->grad *= inv_b;
    adam.lr = nn::warmup_inv_sqrt_lr(cfg.peak_lr, cfg.warmup_steps, step);
    nn::adam_step(manip_params, adam, step);

    StepRecord rec;
    rec.step = step;
    rec.total = loss_sum * inv_b;
    rec.res = rec.total;  // stage-2 loss is the masked cross-entropy
    rec.lr = adam.lr;
    rec.gamma = gamma_logged;
    if (!std::isfinite(rec.total)) {
      std::ostringstream os;
      os << "training diverged: loss is not finite at step " << step;
      throw std::runtime_error(os.str());
    }
    if (step % cfg.log_every == 0 || step == 1 || step == cfg.stage2_steps) {
      result.log.push_back(rec);
      if (log_out) log_out << rec.to_json() << "\n";
    }
  }

  // held-out masked accuracy against the marginal-frequency baseline
  Rng eval_rng = root.fork(7);
  std::vector<long> histogram(models.manip().config().codebook_size, 0);
  long correct = 0, counted = 0;
  std::vector<std::pair<std::vector<int>, audio::FrameMask>> eval_set;
  for (int i = 0; i < 16; ++i) {
    const std::vector<int> ids = provider(eval_rng);
    const audio::FrameMask mask =
        audio::sample_mask(static_cast<int>(ids.size()), 0.3, eval_rng.next());
    for (int id : ids) ++histogram[id];
    eval_set.emplace_back(ids, mask);
  }
  const int top_token = static_cast<int>(
      std::max_element(histogram.begin(), histogram.end()) - histogram.begin());
  long baseline_hits = 0;
  for (const auto& [ids, mask] : eval_set) {
    const manipulator::TokenDistribution dist = models.manip().predict_masked(ids, mask);
    for (int t = 0; t < dist.frames(); ++t) {
      if (!mask.flags[t]) continue;
      int best = 0;
      for (int c = 1; c < dist.logits.cols; ++c)
        if (dist.logits.at(t, c) > dist.logits.at(t, best)) best = c;
      correct += best == ids[t];
      baseline_hits += top_token == ids[t];
      ++counted;
    }
  }
  result.masked_accuracy = counted ? static_cast<double>(correct) / counted : 0.0;
  result.marginal_baseline = counted ? static_cast<double>(baseline_hits) / counted : 0.0;
  models.stage2_trained = true;
  return result;
}

Stage2Result train_stage2(codec::Models& models, const std::vector<audio::Waveform>& corpus,
                          const TrainConfig& cfg) {
  if (!models.stage1_trained)
    throw MissingPrerequisiteError("stage-1 checkpoint required before stage 2");
  if (corpus.empty()) throw std::invalid_argument("training corpus is empty");
  const auto& mcfg = models.config();
  const int clip_len = std::max(mcfg.stft.win_length,
                                static_cast<int>(std::llround(cfg.clip_seconds * mcfg.sample_rate)));
  TokenProvider provider = [&models, &corpus, clip_len, &mcfg](Rng& rng) {
    const auto& src = corpus[rng.uniform_int(corpus.size())];
    const audio::Waveform wave = random_crop(src, clip_len, rng);
    const audio::Spectrogram spec = audio::stft(wave, mcfg.stft);
    const Tensor latents = models.vq().encode(spec.magnitude);
    return vq::quantize(latents, models.vq().codebook()).codes.ids;
  };
  return train_stage2_tokens(models, provider, cfg);
}

// --- calibration ---------------------------------------------------------------

stats::DetectorCalibration calibrate(codec::Models& models,
                                     const std::vector<audio::Waveform>& heldout,
                                     double watermark_ratio, double threshold, uint64_t seed,
                                     codec::SubstitutionMode mode,
                                     const std::string& source_label) {
  if (heldout.empty()) throw std::invalid_argument("calibration corpus is empty");
  Rng rng(seed);
  long tp = 0, pos = 0, fp = 0, neg = 0;
  for (const auto& clip : heldout) {
    const audio::Spectrogram spec = audio::stft(clip, models.config().stft);
    const codec::LocalizerOutput clean = codec::localizer_forward(models, spec.magnitude, threshold);
    fp += static_cast<long>(clean.detected.size());
    neg += spec.frames();

    const int t_frames = spec.frames();
    const int payload = std::max(1, static_cast<int>(std::llround(watermark_ratio * t_frames)));
    std::vector<int> bits(payload);
    for (int& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;
    codec::EmbedOptions opts;
    opts.seed = rng.next();
    opts.mode = mode;
    opts.require_trained = false;
    const codec::EmbedResult er = codec::embed(models, clip, bits, opts);
    const audio::Spectrogram wm_spec = audio::stft(er.watermarked, models.config().stft);
    const codec::LocalizerOutput wm = codec::localizer_forward(models, wm_spec.magnitude, threshold);
    std::vector<uint8_t> hit(t_frames, 0);
    for (int t : wm.detected) hit[t] = 1;
    for (int t : er.plan.positions) tp += hit[t];
    pos += payload;
  }
  stats::DetectorCalibration cal;
  cal.alpha = std::min(1.0, (tp + 0.5) / (pos + 1.0));
  cal.beta = std::max((fp + 0.5) / (neg + 1.0), stats::kMinCalibratedBeta);
  cal.threshold = threshold;
  cal.source = source_label;
  models.calibration = cal;
  return cal;
}

}  // namespace codemark::train
