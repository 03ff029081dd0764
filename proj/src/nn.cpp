// src/nn.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace codemark::nn {

Parameter* ParamStore::create(const std::string& name, int rows, int cols) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor::zeros(rows, cols);
  p->grad = Tensor::zeros(rows, cols);
  p->adam_m = Tensor::zeros(rows, cols);
  p->adam_v = Tensor::zeros(rows, cols);
  Parameter* raw = p.get();
  params_.push_back(std::move(p));
  return raw;
}

Parameter* ParamStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p->zero_grad();
}

uint64_t ParamStore::value_hash() const {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params_) {
    for (char c : p->name) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data.data());
    const size_t n = p->value.data.size() * sizeof(double);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

int TapeBinding::node(Parameter* p) {
  for (const auto& [bp, id] : bound_)
    if (bp == p) return id;
  const int id = tape_.leaf(p->value);
  bound_.emplace_back(p, id);
  return id;
}

void TapeBinding::flush_grads() {
  for (const auto& [p, id] : bound_) {
    const Tensor& g = tape_.grad(id);
    if (!g.empty()) p->grad += g;
  }
}

void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg, int step_index) {
  const double b1t = 1.0 - std::pow(cfg.beta1, step_index);
  const double b2t = 1.0 - std::pow(cfg.beta2, step_index);
  for (Parameter* p : params) {
    Parameter& pr = *p;
    for (size_t i = 0; i < pr.value.data.size(); ++i) {
      const double g = pr.grad.data[i];
      pr.adam_m.data[i] = cfg.beta1 * pr.adam_m.data[i] + (1.0 - cfg.beta1) * g;
      pr.adam_v.data[i] = cfg.beta2 * pr.adam_v.data[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = pr.adam_m.data[i] / b1t;
      const double vhat = pr.adam_v.data[i] / b2t;
      pr.value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

std::vector<Parameter*> params_with_prefix(ParamStore& store, const std::string& prefix,
                                           bool invert) {
  std::vector<Parameter*> out;
  for (const auto& p : store.all()) {
    const bool match = p->name.rfind(prefix, 0) == 0;
    if (match != invert) out.push_back(p.get());
  }
  return out;
}

double warmup_inv_sqrt_lr(double peak_lr, int warmup_steps, int step_index) {
  const double s = std::max(1, step_index);
  const double w = std::max(1, warmup_steps);
  return peak_lr * std::min(s / w, std::sqrt(w / s));
}

void init_he(Tensor& w, int fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / std::max(1, fan_in));
  for (double& v : w.data) v = rng.normal() * stddev;
}

void init_normal(Tensor& w, double stddev, Rng& rng) {
  for (double& v : w.data) v = rng.normal() * stddev;
}

// --- layers -------------------------------------------------------------------

Conv1d::Conv1d(ParamStore& store, const std::string& name, int in_ch_, int out_ch_, int k_,
               int dilation_, Rng& rng, bool zero_init)
    : in_ch(in_ch_), out_ch(out_ch_), k(k_), dilation(dilation_) {
  w = store.create(name + ".w", out_ch, in_ch * k);
  b = store.create(name + ".b", 1, out_ch);
  if (!zero_init) init_he(w->value, in_ch * k, rng);
}

int Conv1d::forward(ad::Tape& tape, TapeBinding& bind, int x) const {
  return tape.conv1d(x, bind.node(w), bind.node(b), k, dilation);
}

Linear::Linear(ParamStore& store, const std::string& name, int in_dim, int out_dim, Rng& rng,
               bool zero_init) {
  w = store.create(name + ".w", in_dim, out_dim);
  b = store.create(name + ".b", 1, out_dim);
  if (!zero_init) init_he(w->value, in_dim, rng);
}

int Linear::forward(ad::Tape& tape, TapeBinding& bind, int x) const {
  const int y = tape.matmul(x, bind.node(w));
  return tape.add_row_bias(y, bind.node(b));
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, int dim) {
  gain = store.create(name + ".g", 1, dim);
  bias = store.create(name + ".b", 1, dim);
  gain->value.fill(1.0);
}

int LayerNorm::forward(ad::Tape& tape, TapeBinding& bind, int x) const {
  return tape.layer_norm(x, bind.node(gain), bind.node(bias));
}

ResBlock1d::ResBlock1d(ParamStore& store, const std::string& name, int ch, int k, int dilation,
                       Rng& rng)
    : c1(store, name + ".c1", ch, ch, k, dilation, rng),
      c2(store, name + ".c2", ch, ch, k, dilation, rng) {}

int ResBlock1d::forward(ad::Tape& tape, TapeBinding& bind, int x) const {
  int h = c1.forward(tape, bind, x);
  h = tape.relu(h);
  h = c2.forward(tape, bind, h);
  return tape.add(x, h);
}

ConvStack::ConvStack(ParamStore& store, const std::string& name, int in_ch, int hidden,
                     int out_ch, int k, const std::vector<int>& dilations, Rng& rng,
                     bool zero_out)
    : in_conv(store, name + ".in", in_ch, hidden, k, 1, rng),
      out_conv() {
  blocks.reserve(dilations.size());
  for (size_t i = 0; i < dilations.size(); ++i)
    blocks.emplace_back(store, name + ".blk" + std::to_string(i), hidden, k, dilations[i], rng);
  out_conv = Conv1d(store, name + ".out", hidden, out_ch, 1, 1, rng, zero_out);
}

int ConvStack::forward(ad::Tape& tape, TapeBinding& bind, int x) const {
  int h = in_conv.forward(tape, bind, x);
  h = tape.relu(h);
  for (const auto& blk : blocks) h = blk.forward(tape, bind, h);
  return out_conv.forward(tape, bind, h);
}

Tensor ConvStack::infer(const Tensor& x) const {
  ad::Tape tape;
  TapeBinding bind(tape);
  const int id = forward(tape, bind, tape.constant(x));
  return tape.val(id);
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& name, int dim_,
                                       int heads_, Rng& rng)
    : wq(store, name + ".wq", dim_, dim_, rng),
      wk(store, name + ".wk", dim_, dim_, rng),
      wv(store, name + ".wv", dim_, dim_, rng),
      wo(store, name + ".wo", dim_, dim_, rng),
      heads(heads_),
      dim(dim_) {
  if (dim_ % heads_ != 0) throw std::invalid_argument("attention dim must divide heads");
}

int MultiHeadAttention::forward(ad::Tape& tape, TapeBinding& bind, int x) const {
  const int q = wq.forward(tape, bind, x);
  const int k = wk.forward(tape, bind, x);
  const int v = wv.forward(tape, bind, x);
  const int head_dim = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  int merged = -1;
  for (int h = 0; h < heads; ++h) {
    const int qh = tape.slice_cols(q, h * head_dim, head_dim);
    const int kh = tape.slice_cols(k, h * head_dim, head_dim);
    const int vh = tape.slice_cols(v, h * head_dim, head_dim);
    int scores = tape.matmul(qh, kh, false, true);
    scores = tape.scale(scores, inv_sqrt);
    const int probs = tape.softmax_rows(scores);
    const int ctx = tape.matmul(probs, vh);
    merged = (h == 0) ? ctx : tape.concat_cols(merged, ctx);
  }
  return wo.forward(tape, bind, merged);
}

TransformerBlock::TransformerBlock(ParamStore& store, const std::string& name, int dim,
                                   int heads, int filter, int kernel, Rng& rng)
    : ln1(store, name + ".ln1", dim),
      ln2(store, name + ".ln2", dim),
      attn(store, name + ".attn", dim, heads, rng),
      ff1(store, name + ".ff1", dim, filter, kernel, 1, rng),
      ff2(store, name + ".ff2", filter, dim, kernel, 1, rng) {}

int TransformerBlock::forward(ad::Tape& tape, TapeBinding& bind, int x) const {
  int h = ln1.forward(tape, bind, x);
  h = attn.forward(tape, bind, h);
  int y = tape.add(x, h);
  int f = ln2.forward(tape, bind, y);
  f = ff1.forward(tape, bind, f);
  f = tape.relu(f);
  f = ff2.forward(tape, bind, f);
  return tape.add(y, f);
}

}  // namespace codemark::nn
