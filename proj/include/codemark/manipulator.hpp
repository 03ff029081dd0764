// include/codemark/manipulator.hpp
// Non-autoregressive masked-token predictor and the parity-constrained
// sampling rule used to pick replacement tokens.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <vector>

#include "codemark/audio.hpp"
#include "codemark/autodiff.hpp"
#include "codemark/nn.hpp"
#include "codemark/rng.hpp"
#include "codemark/tensor.hpp"

namespace codemark::manipulator {

struct ManipulatorConfig {
  int codebook_size = 128;  // K
  int dim = 128;            // hidden / code embedding size
  int layers = 4;
  int heads = 2;
  int filter = 512;
  int kernel = 5;
  int max_positions = 4096;

  void validate() const;
};

struct TokenDistribution {
  Tensor logits;  // T x K

  int frames() const { return logits.rows; }
  // Row-wise softmax; rows sum to 1 within 1e-6.
  Tensor probabilities() const;
};

enum class SampleMode { argmax, temperature };

// Token of the required parity (id mod 2). argmax picks the most probable id
// inside the parity class (lowest id wins exact ties); temperature mode draws
// from the renormalized class distribution. Throws when the class is empty.
int sample_parity_token(const double* logits, int k, int required_parity, SampleMode mode,
                        double temperature, Rng& rng);

class ManipulatorModel {
 public:
  ManipulatorModel(nn::ParamStore& store, const ManipulatorConfig& cfg, Rng& rng);

  const ManipulatorConfig& config() const { return cfg_; }
  int mask_token() const { return cfg_.codebook_size; }

  // Logits for every frame in one parallel pass. Masked positions are replaced
  // by the reserved MASK embedding on input; their original values are never
  // read.
  TokenDistribution predict_masked(const std::vector<int>& ids,
                                   const audio::FrameMask& mask) const;
  int forward_node(ad::Tape& tape, nn::TapeBinding& bind, const std::vector<int>& ids,
                   const audio::FrameMask& mask) const;

 private:
  ManipulatorConfig cfg_;
  nn::Parameter* token_embedding_ = nullptr;     // (K+1) x dim
  nn::Parameter* position_embedding_ = nullptr;  // max_positions x dim
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm final_norm_;
  nn::Linear out_;
};

}  // namespace codemark::manipulator
