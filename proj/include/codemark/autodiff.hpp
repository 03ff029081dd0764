// include/codemark/autodiff.hpp
// Reverse-mode tape over 2-D tensors. One tape per forward pass; ops append
// nodes and backward() walks them in reverse. Heavy inner loops delegate to
// codemark::kernels so the serial/parallel switch covers training as well.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "codemark/attacks.hpp"
#include "codemark/audio.hpp"
#include "codemark/tensor.hpp"

namespace codemark::ad {

class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on demand during backward
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  // Leaves.
  int constant(Tensor v);
  int leaf(Tensor v);  // participates in gradients

  // Elementwise / shape ops.
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int scale(int a, double c);
  int add_row_bias(int a, int bias);                 // a: TxC, bias: 1xC
  int relu(int a);
  int softplus(int a);
  int log_eps(int a, double eps);
  int concat_cols(int a, int b);
  int slice_cols(int a, int c0, int len);
  int row_scale(int a, std::vector<double> weights);  // row r scaled by weights[r]
  // value = a + offset, gradient passes straight through (quantizer bridge)
  int add_const_offset(int a, Tensor offset);
  // out.row(r) = take_a[r] ? a.row(r) : passthrough.row(r)
  int mix_rows(int a, Tensor passthrough, std::vector<uint8_t> take_a);

  // Linear algebra / NN ops.
  int matmul(int a, int b, bool trans_a = false, bool trans_b = false);
  int conv1d(int x, int w, int bias, int k, int dilation);  // bias < 0 to skip
  int layer_norm(int x, int gain, int bias, double eps = 1e-5);
  int embedding(int table, std::vector<int> ids);
  int softmax_rows(int a);

  // Losses and reductions (all produce 1x1 tensors).
  int mse(int a, int b);
  int l1(int a, int b);
  int mean_all(int a);
  int fro_norm(int a);
  int cross_entropy_rows(int logits, std::vector<int> targets, std::vector<double> row_weights);
  int bce_logits_rows(int logits, std::vector<double> targets, std::vector<double> row_weights);
  int s_add(int a, int b);
  int s_scale(int a, double c);
  int s_div(int a, int b);

  // Audio-coupled ops.
  int stft_magnitude(int wave, const audio::StftConfig& cfg);  // wave: Nx1 -> TxF
  int istft_fixed_phase(int mag, Tensor phase, const audio::StftConfig& cfg, int out_len);
  int distort(int wave, const attacks::DistortionSpec& spec, int sample_rate);

  // Externally computed scalar objective with a caller-supplied gradient with
  // respect to x (plug-in point for adversarial objectives).
  int external_scalar(int x, double value, Tensor grad_wrt_x);

  void backward(int loss);

  const Tensor& val(int id) const { return nodes_[id].value; }
  const Tensor& grad(int id) const { return nodes_[id].grad; }
  Tensor& grad_mut(int id) { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  size_t size() const { return nodes_.size(); }

 private:
  int push(Tensor value, bool needs_grad, std::function<void(Tape&)> back);
  void ensure_grad(int id);

  std::deque<Node> nodes_;
};

}  // namespace codemark::ad
