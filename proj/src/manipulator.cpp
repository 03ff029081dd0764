// src/manipulator.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/manipulator.hpp"

#include <cmath>
#include <stdexcept>

namespace codemark::manipulator {

void ManipulatorConfig::validate() const {
  if (codebook_size < 2 || dim < 1 || layers < 1 || heads < 1 || filter < 1 || kernel < 1 ||
      max_positions < 1)
    throw std::invalid_argument("manipulator config fields must be positive");
  if (dim % heads != 0) throw std::invalid_argument("dim must be divisible by heads");
}

Tensor TokenDistribution::probabilities() const {
  Tensor probs(logits.rows, logits.cols);
  for (int r = 0; r < logits.rows; ++r) {
    double mx = logits.at(r, 0);
    for (int c = 1; c < logits.cols; ++c) mx = std::max(mx, logits.at(r, c));
    double z = 0.0;
    for (int c = 0; c < logits.cols; ++c) {
      const double e = std::exp(logits.at(r, c) - mx);
      probs.at(r, c) = e;
      z += e;
    }
    for (int c = 0; c < logits.cols; ++c) probs.at(r, c) /= z;
  }
  return probs;
}

int sample_parity_token(const double* logits, int k, int required_parity, SampleMode mode,
                        double temperature, Rng& rng) {
  if (required_parity != 0 && required_parity != 1)
    throw std::invalid_argument("parity must be 0 or 1");
  int first = -1;
  for (int i = required_parity; i < k; i += 2) {
    first = i;
    break;
  }
  if (first < 0) throw std::invalid_argument("no codebook id with the required parity");

  if (mode == SampleMode::argmax) {
    int best = first;
    for (int i = first + 2; i < k; i += 2)
      if (logits[i] > logits[best]) best = i;  // strict > keeps the lowest id on ties
    return best;
  }

  // temperature sampling within the parity class
  const double tau = temperature > 0.0 ? temperature : 1.0;
  double mx = logits[first];
  for (int i = first; i < k; i += 2) mx = std::max(mx, logits[i]);
  double z = 0.0;
  for (int i = first; i < k; i += 2) z += std::exp((logits[i] - mx) / tau);
  double u = rng.uniform() * z;
  int last = first;
  for (int i = first; i < k; i += 2) {
    u -= std::exp((logits[i] - mx) / tau);
    last = i;
    if (u <= 0.0) return i;
  }
  return last;
}

ManipulatorModel::ManipulatorModel(nn::ParamStore& store, const ManipulatorConfig& cfg, Rng& rng)
    : cfg_(cfg), final_norm_(store, "manip.final_ln", cfg.dim) {
  cfg_.validate();
  token_embedding_ = store.create("manip.tok_emb", cfg.codebook_size + 1, cfg.dim);
  position_embedding_ = store.create("manip.pos_emb", cfg.max_positions, cfg.dim);
  nn::init_normal(token_embedding_->value, 0.02, rng);
  nn::init_normal(position_embedding_->value, 0.02, rng);
  blocks_.reserve(cfg.layers);
  for (int i = 0; i < cfg.layers; ++i)
    blocks_.emplace_back(store, "manip.blk" + std::to_string(i), cfg.dim, cfg.heads, cfg.filter,
                         cfg.kernel, rng);
  // zero-initialized head: uniform token distribution before training
  out_ = nn::Linear(store, "manip.out", cfg.dim, cfg.codebook_size, rng, /*zero_init=*/true);
}

int ManipulatorModel::forward_node(ad::Tape& tape, nn::TapeBinding& bind,
                                   const std::vector<int>& ids,
                                   const audio::FrameMask& mask) const {
  const int t_frames = static_cast<int>(ids.size());
  if (mask.frames() != t_frames)
    throw std::invalid_argument("mask frame count does not match token sequence");
  if (t_frames > cfg_.max_positions)
    throw std::invalid_argument("sequence longer than the positional table");

  std::vector<int> in_ids(t_frames);
  std::vector<int> pos_ids(t_frames);
  for (int t = 0; t < t_frames; ++t) {
    if (ids[t] < 0 || ids[t] >= cfg_.codebook_size)
      throw std::invalid_argument("token id outside the codebook");
    in_ids[t] = mask.flags[t] ? mask_token() : ids[t];
    pos_ids[t] = t;
  }

  const int tok = tape.embedding(bind.node(token_embedding_), in_ids);
  const int pos = tape.embedding(bind.node(position_embedding_), pos_ids);
  int h = tape.add(tok, pos);
  for (const auto& blk : blocks_) h = blk.forward(tape, bind, h);
  h = final_norm_.forward(tape, bind, h);
  return out_.forward(tape, bind, h);
}

TokenDistribution ManipulatorModel::predict_masked(const std::vector<int>& ids,
                                                   const audio::FrameMask& mask) const {
  ad::Tape tape;
  nn::TapeBinding bind(tape);
  const int logits = forward_node(tape, bind, ids, mask);
  TokenDistribution dist;
  dist.logits = tape.val(logits);
  return dist;
}

}  // namespace codemark::manipulator
