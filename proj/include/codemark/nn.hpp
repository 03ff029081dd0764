// include/codemark/nn.hpp
// Parameters, layers, and the network stacks: convolutional residual stacks
// for the spectrogram encoder / masked decoder / frame classifiers, and the
// Transformer token predictor.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "codemark/autodiff.hpp"
#include "codemark/rng.hpp"
#include "codemark/tensor.hpp"

namespace codemark::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;

  void zero_grad() { grad.fill(0.0); }
};

// Owns every parameter of a model bundle; iteration order is creation order,
// which the checkpoint format and the optimizer both rely on.
class ParamStore {
 public:
  Parameter* create(const std::string& name, int rows, int cols);
  Parameter* find(const std::string& name);
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  void zero_grads();
  uint64_t value_hash() const;  // FNV-1a over raw parameter bytes

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// Binds parameters into a tape for one forward pass and flushes node gradients
// back into Parameter::grad after backward().
class TapeBinding {
 public:
  explicit TapeBinding(ad::Tape& tape) : tape_(tape) {}
  int node(Parameter* p);
  void flush_grads();

 private:
  ad::Tape& tape_;
  std::vector<std::pair<Parameter*, int>> bound_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-9;
};

// One update over the given parameters; step_index starts at 1. Training
// stages pass disjoint subsets so a stage never perturbs frozen parameters.
void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg, int step_index);

// Parameters whose name starts (or, with invert, does not start) with prefix.
std::vector<Parameter*> params_with_prefix(ParamStore& store, const std::string& prefix,
                                           bool invert = false);

// Inverse-square-root schedule with linear warmup, peaking at peak_lr.
double warmup_inv_sqrt_lr(double peak_lr, int warmup_steps, int step_index);

// --- initializers -----------------------------------------------------------

void init_he(Tensor& w, int fan_in, Rng& rng);
void init_normal(Tensor& w, double stddev, Rng& rng);

// --- layers -------------------------------------------------------------------

struct Conv1d {
  Parameter* w = nullptr;  // c_out x (c_in * k)
  Parameter* b = nullptr;  // 1 x c_out
  int in_ch = 0, out_ch = 0, k = 1, dilation = 1;

  Conv1d() = default;
  Conv1d(ParamStore& store, const std::string& name, int in_ch, int out_ch, int k,
         int dilation, Rng& rng, bool zero_init = false);
  int forward(ad::Tape& tape, TapeBinding& bind, int x) const;
};

struct Linear {
  Parameter* w = nullptr;  // in x out
  Parameter* b = nullptr;  // 1 x out
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in_dim, int out_dim, Rng& rng,
         bool zero_init = false);
  int forward(ad::Tape& tape, TapeBinding& bind, int x) const;
};

struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, int dim);
  int forward(ad::Tape& tape, TapeBinding& bind, int x) const;
};

// x + conv_k(relu(conv_k(x))); both convs share the block's dilation.
struct ResBlock1d {
  Conv1d c1, c2;
  ResBlock1d() = default;
  ResBlock1d(ParamStore& store, const std::string& name, int ch, int k, int dilation, Rng& rng);
  int forward(ad::Tape& tape, TapeBinding& bind, int x) const;
};

// in_conv -> relu -> residual blocks -> 1x1 out_conv. Shared shape of the
// spectrogram encoder, masked decoder and the frame classifiers.
struct ConvStack {
  Conv1d in_conv;
  std::vector<ResBlock1d> blocks;
  Conv1d out_conv;
  ConvStack() = default;
  ConvStack(ParamStore& store, const std::string& name, int in_ch, int hidden, int out_ch,
            int k, const std::vector<int>& dilations, Rng& rng, bool zero_out = false);
  int forward(ad::Tape& tape, TapeBinding& bind, int x) const;
  // Convenience: single-input inference without an external tape.
  Tensor infer(const Tensor& x) const;
};

struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int heads = 2;
  int dim = 128;
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& name, int dim, int heads, Rng& rng);
  int forward(ad::Tape& tape, TapeBinding& bind, int x) const;
};

// Pre-norm Transformer block with a convolutional feed-forward (kernel 5).
struct TransformerBlock {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Conv1d ff1, ff2;
  TransformerBlock() = default;
  TransformerBlock(ParamStore& store, const std::string& name, int dim, int heads,
                   int filter, int kernel, Rng& rng);
  int forward(ad::Tape& tape, TapeBinding& bind, int x) const;
};

}  // namespace codemark::nn
