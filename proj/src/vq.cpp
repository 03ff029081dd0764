// src/vq.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/vq.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "codemark/kernels.hpp"

namespace codemark::vq {

void Codebook::validate() const {
  if (entries.rows < 2) throw std::invalid_argument("codebook needs at least 2 entries");
  for (double v : entries.data)
    if (!std::isfinite(v)) throw std::invalid_argument("codebook entry is not finite");
}

Codebook make_codebook(int k, int d, Rng& rng) {
  if (k < 2) throw std::invalid_argument("codebook needs at least 2 entries");
  Codebook cb;
  cb.entries = Tensor(k, d);
  nn::init_normal(cb.entries, 0.5, rng);
  // staggered grace: entries that never get selected fall below the reinit
  // threshold at different steps instead of reseeding in one wave
  cb.usage_ema.resize(k);
  for (int i = 0; i < k; ++i) cb.usage_ema[i] = 6.0 + (i * 7) % 18;
  return cb;
}

QuantizeResult quantize(const Tensor& latents, const Codebook& codebook) {
  if (codebook.entries.rows == 0) throw std::invalid_argument("codebook is empty");
  codebook.validate();
  if (latents.cols != codebook.dim())
    throw std::invalid_argument("latent dimension does not match codebook");

  const int t_frames = latents.rows;
  QuantizeResult out;
  out.codes.ids.resize(t_frames);
  std::vector<double> dist2(t_frames);
  kernels::nearest_entry(latents.data.data(), t_frames, latents.cols,
                         codebook.entries.data.data(), codebook.size(),
                         out.codes.ids.data(), dist2.data());

  out.codes.vectors = Tensor(t_frames, latents.cols);
  double acc = 0.0;
  for (int t = 0; t < t_frames; ++t) {
    const double* e = codebook.entries.row(out.codes.ids[t]);
    std::copy(e, e + latents.cols, out.codes.vectors.row(t));
    acc += dist2[t];
  }
  // both terms share the same value at the assignment point; they differ in
  // which side receives the gradient during training
  const double mean_sq = acc / (static_cast<double>(t_frames) * latents.cols);
  out.codebook_loss = mean_sq;
  out.commitment_loss = mean_sq;
  return out;
}

void update_usage(Codebook& codebook, const std::vector<int>& ids, double decay) {
  for (double& u : codebook.usage_ema) u *= decay;
  for (int id : ids) codebook.usage_ema[id] += 1.0;
}

std::vector<int> reinit_dead_codes_ids(Codebook& codebook, const Tensor& recent_latents,
                                       Rng& rng, double threshold, double noise_scale,
                                       double usage_reset) {
  std::vector<int> revived;
  if (recent_latents.rows == 0) return revived;
  for (int k = 0; k < codebook.size(); ++k) {
    if (codebook.usage_ema[k] >= threshold) continue;
    // sample a recent latent weighted by squared distance to its nearest live
    // entry; a replacement seeded into uncovered space does not steal
    // assignments from entries the rest of the system already relies on
    std::vector<double> weights(recent_latents.rows, 0.0);
    double total = 0.0;
    for (int r = 0; r < recent_latents.rows; ++r) {
      const double* z = recent_latents.row(r);
      double best = 1e300;
      for (int e = 0; e < codebook.size(); ++e) {
        if (codebook.usage_ema[e] < threshold && e != k) continue;  // skip other dead rows
        const double* c = codebook.entries.row(e);
        double acc = 0.0;
        for (int i = 0; i < codebook.dim(); ++i) {
          const double d = z[i] - c[i];
          acc += d * d;
        }
        best = std::min(best, acc);
      }
      weights[r] = best;
      total += best;
    }
    int pick;
    if (total > 1e-12) {
      double u = rng.uniform() * total;
      pick = recent_latents.rows - 1;
      for (int r = 0; r < recent_latents.rows; ++r) {
        u -= weights[r];
        if (u <= 0.0) {
          pick = r;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.uniform_int(recent_latents.rows));
    }
    double* e = codebook.entries.row(k);
    const double* z = recent_latents.row(pick);
    for (int i = 0; i < codebook.dim(); ++i) e[i] = z[i] + noise_scale * rng.normal();
    codebook.usage_ema[k] = usage_reset;
    revived.push_back(k);
  }
  return revived;
}

int reinit_dead_codes(Codebook& codebook, const Tensor& recent_latents, Rng& rng,
                      double threshold, double noise_scale, double usage_reset) {
  return static_cast<int>(
      reinit_dead_codes_ids(codebook, recent_latents, rng, threshold, noise_scale, usage_reset)
          .size());
}

// --- losses -------------------------------------------------------------------

std::vector<StftLossResolution> default_stft_loss_resolutions() {
  return {{512, 128}, {1024, 256}, {2048, 512}};
}

namespace {

audio::StftConfig loss_config(const StftLossResolution& res) {
  audio::StftConfig cfg;
  cfg.n_fft = res.n_fft;
  cfg.hop = res.hop;
  cfg.win_length = res.n_fft;
  return cfg;
}

}  // namespace

int multi_res_stft_loss_node(ad::Tape& tape, int wave, const audio::Waveform& reference,
                             const std::vector<StftLossResolution>& resolutions) {
  const int n = tape.val(wave).rows;
  int total = -1;
  int used = 0;
  for (const auto& res : resolutions) {
    if (n < res.n_fft || reference.length() < res.n_fft) continue;
    const audio::StftConfig cfg = loss_config(res);
    const audio::Spectrogram ref_spec = audio::stft(reference, cfg);
    const int ref_mag = tape.constant(ref_spec.magnitude);
    const int test_mag = tape.stft_magnitude(wave, cfg);
    // spectral convergence
    const int diff = tape.sub(test_mag, ref_mag);
    const int sc = tape.s_div(tape.fro_norm(diff), tape.fro_norm(ref_mag));
    // log-magnitude L1
    const int lm = tape.l1(tape.log_eps(test_mag, 1e-7), tape.log_eps(ref_mag, 1e-7));
    const int term = tape.s_add(sc, lm);
    total = (used == 0) ? term : tape.s_add(total, term);
    ++used;
  }
  if (used == 0) throw std::invalid_argument("signal too short for every stft loss resolution");
  return tape.s_scale(total, 1.0 / used);
}

double multi_res_stft_loss(const audio::Waveform& reference, const audio::Waveform& test,
                           const std::vector<StftLossResolution>& resolutions) {
  ad::Tape tape;
  Tensor w(test.length(), 1);
  for (int i = 0; i < test.length(); ++i) w.at(i, 0) = test.samples[i];
  const int node = multi_res_stft_loss_node(tape, tape.constant(std::move(w)), reference,
                                            resolutions);
  return tape.val(node).at(0, 0);
}

VqLossBreakdown vq_loss(const audio::Waveform& reference, const audio::Waveform& reconstruction,
                        double codebook_loss, double commitment_loss, double adversarial_loss,
                        double lambda_adv) {
  VqLossBreakdown b;
  b.reconstruction = multi_res_stft_loss(reference, reconstruction);
  b.code = codebook_loss + kCommitmentCoefficient * commitment_loss;
  b.adversarial = adversarial_loss;
  b.lambda_adv = lambda_adv;
  b.total = b.reconstruction + b.code + lambda_adv * adversarial_loss;
  return b;
}

// --- model ---------------------------------------------------------------------

Tensor compress_magnitude(const Tensor& magnitude) {
  Tensor out = magnitude;
  for (double& v : out.data) v = std::log1p(v);
  return out;
}

VqModel::VqModel(nn::ParamStore& store, const VqModelConfig& cfg, Rng& rng)
    : cfg_(cfg),
      encoder_(store, "vq.encoder", cfg.spect_bins, cfg.hidden, cfg.code_dim, cfg.kernel,
               cfg.encoder_dilations, rng),
      decoder_(store, "vq.decoder", cfg.code_dim + cfg.spect_bins, cfg.hidden, cfg.spect_bins,
               cfg.kernel, cfg.decoder_dilations, rng),
      codebook_(make_codebook(cfg.codebook_size, cfg.code_dim, rng)) {
  codebook_param_ = store.create("vq.codebook", cfg.codebook_size, cfg.code_dim);
  sync_codebook_param();
}

void VqModel::sync_codebook_param() { codebook_param_->value = codebook_.entries; }
void VqModel::sync_codebook_struct() { codebook_.entries = codebook_param_->value; }

Tensor VqModel::encode(const Tensor& magnitude) const {
  if (magnitude.cols != cfg_.spect_bins)
    throw std::invalid_argument("magnitude bin count does not match model");
  return encoder_.infer(compress_magnitude(magnitude));
}

int VqModel::encode_node(ad::Tape& tape, nn::TapeBinding& bind, int compressed_magnitude) const {
  return encoder_.forward(tape, bind, compressed_magnitude);
}

int VqModel::decode_node(ad::Tape& tape, nn::TapeBinding& bind, int gated_codes,
                         int gated_magnitude) const {
  const int joined = tape.concat_cols(gated_codes, gated_magnitude);
  const int raw = decoder_.forward(tape, bind, joined);
  return tape.softplus(raw);
}

Tensor VqModel::masked_decode(const CodeSequence& codes, const Tensor& magnitude,
                              const audio::FrameMask& mask) const {
  const int t_frames = magnitude.rows;
  if (codes.frames() != t_frames || mask.frames() != t_frames)
    throw std::invalid_argument("codes, magnitude and mask must share the frame count");
  if (magnitude.cols != cfg_.spect_bins)
    throw std::invalid_argument("magnitude bin count does not match model");
  if (codes.vectors.cols != cfg_.code_dim)
    throw std::invalid_argument("code vector dimension does not match model");
  const int weight = const_cast<audio::FrameMask&>(mask).weight();
  if (weight > std::llround(0.5 * t_frames))
    throw std::invalid_argument("mask covers more than half the frames");

  std::vector<double> on(t_frames), off(t_frames);
  for (int t = 0; t < t_frames; ++t) {
    on[t] = mask.flags[t] ? 1.0 : 0.0;
    off[t] = 1.0 - on[t];
  }

  ad::Tape tape;
  nn::TapeBinding bind(tape);
  const int codes_node = tape.row_scale(tape.constant(codes.vectors), on);
  const int mag_node = tape.row_scale(tape.constant(compress_magnitude(magnitude)), off);
  const int generated = decode_node(tape, bind, codes_node, mag_node);
  const int mixed = tape.mix_rows(generated, magnitude, mask.flags);
  return tape.val(mixed);
}

}  // namespace codemark::vq
