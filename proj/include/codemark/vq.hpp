// include/codemark/vq.hpp
// Discrete code layer: codebook with usage-tracked entries and clustering
// reinitialization of dead entries, frame-wise quantization, and the
// mask-infilling spectrogram autoencoder built around it.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <vector>

#include "codemark/audio.hpp"
#include "codemark/autodiff.hpp"
#include "codemark/nn.hpp"
#include "codemark/rng.hpp"
#include "codemark/tensor.hpp"

namespace codemark::vq {

struct Codebook {
  Tensor entries;                  // K x d
  std::vector<double> usage_ema;   // per-entry decayed usage

  int size() const { return entries.rows; }
  int dim() const { return entries.cols; }
  // K >= 2 guarantees both parity classes of ids are nonempty.
  void validate() const;
};

Codebook make_codebook(int k, int d, Rng& rng);

struct CodeSequence {
  std::vector<int> ids;  // length T, each in [0, K)
  Tensor vectors;        // T x d, vectors[t] == entries[ids[t]] exactly

  int frames() const { return static_cast<int>(ids.size()); }
};

struct QuantizeResult {
  CodeSequence codes;
  double codebook_loss = 0.0;    // ||sg(z) - e||^2 mean
  double commitment_loss = 0.0;  // ||z - sg(e)||^2 mean
};

// Nearest-entry assignment (lowest id wins ties) plus the standard codebook /
// commitment terms. Throws on empty codebook or dimension mismatch.
QuantizeResult quantize(const Tensor& latents, const Codebook& codebook);

// Decays usage by `decay` then adds this batch's assignment counts.
void update_usage(Codebook& codebook, const std::vector<int>& ids, double decay = 0.99);

// Entries whose decayed usage fell below `threshold` are reassigned to
// randomly sampled rows of recent_latents plus small noise. Returns the number
// of entries reinitialized. No-op when every entry is alive.
int reinit_dead_codes(Codebook& codebook, const Tensor& recent_latents, Rng& rng,
                      double threshold = 1.0, double noise_scale = 0.01,
                      double usage_reset = 10.0);
// Same, reporting which entries were revived (the trainer resets their
// optimizer state).
std::vector<int> reinit_dead_codes_ids(Codebook& codebook, const Tensor& recent_latents,
                                       Rng& rng, double threshold = 1.0,
                                       double noise_scale = 0.01, double usage_reset = 10.0);

// --- losses -------------------------------------------------------------------

struct StftLossResolution {
  int n_fft;
  int hop;
};

// Spectral-convergence + log-magnitude terms averaged over the resolutions.
std::vector<StftLossResolution> default_stft_loss_resolutions();
double multi_res_stft_loss(const audio::Waveform& reference, const audio::Waveform& test,
                           const std::vector<StftLossResolution>& resolutions =
                               default_stft_loss_resolutions());
// Tape version; `wave` is an Nx1 node, reference is constant.
int multi_res_stft_loss_node(ad::Tape& tape, int wave, const audio::Waveform& reference,
                             const std::vector<StftLossResolution>& resolutions =
                                 default_stft_loss_resolutions());

struct VqLossBreakdown {
  double reconstruction = 0.0;
  double code = 0.0;
  double adversarial = 0.0;
  double lambda_adv = 1e-2;
  double total = 0.0;
};

constexpr double kCommitmentCoefficient = 0.25;
constexpr double kLambdaAdv = 1e-2;

// total = rec + (codebook + 0.25 * commitment) + lambda_adv * adv
VqLossBreakdown vq_loss(const audio::Waveform& reference, const audio::Waveform& reconstruction,
                        double codebook_loss, double commitment_loss, double adversarial_loss,
                        double lambda_adv = kLambdaAdv);

// Pluggable adversarial objective. The default implementation is disabled and
// contributes zero; an external discriminator can be dropped in behind it.
class AdversarialLoss {
 public:
  virtual ~AdversarialLoss() = default;
  virtual bool enabled() const { return false; }
  // Returns the generator-side loss for the reconstructed magnitude and fills
  // grad (same shape) when enabled.
  virtual double loss_and_grad(const Tensor& recon_magnitude, Tensor* grad) {
    (void)recon_magnitude;
    if (grad) grad->fill(0.0);
    return 0.0;
  }
};

// --- the masked spectrogram autoencoder ----------------------------------------

struct VqModelConfig {
  int codebook_size = 128;  // K
  int code_dim = 128;       // d
  int hidden = 128;
  int kernel = 3;
  std::vector<int> encoder_dilations = {1, 1, 1};
  std::vector<int> decoder_dilations = {1, 2, 1};
  int spect_bins = 201;  // F = n_fft/2 + 1
};

// Input compression for the networks; magnitudes are fed as log1p(m).
Tensor compress_magnitude(const Tensor& magnitude);

class VqModel {
 public:
  VqModel(nn::ParamStore& store, const VqModelConfig& cfg, Rng& rng);

  const VqModelConfig& config() const { return cfg_; }
  Codebook& codebook() { return codebook_; }
  const Codebook& codebook() const { return codebook_; }
  // codebook entries live in the store as a parameter; expose for training
  nn::Parameter* codebook_param() { return codebook_param_; }
  void sync_codebook_param();  // copies Codebook::entries into the parameter
  void sync_codebook_struct(); // copies the parameter back into Codebook

  // One latent per frame; magnitude is the raw (linear) T x F spectrogram.
  Tensor encode(const Tensor& magnitude) const;
  int encode_node(ad::Tape& tape, nn::TapeBinding& bind, int compressed_magnitude) const;

  // Decoder over (mask-gated code vectors, mask-gated compressed magnitude),
  // output in linear magnitude domain via softplus.
  int decode_node(ad::Tape& tape, nn::TapeBinding& bind, int gated_codes,
                  int gated_magnitude) const;

  // Masked reconstruction: output equals `magnitude` bit-exactly on unmasked
  // frames; masked frames come from the decoder.
  Tensor masked_decode(const CodeSequence& codes, const Tensor& magnitude,
                       const audio::FrameMask& mask) const;

 private:
  VqModelConfig cfg_;
  nn::ConvStack encoder_;
  nn::ConvStack decoder_;
  Codebook codebook_;
  nn::Parameter* codebook_param_ = nullptr;
};

}  // namespace codemark::vq
