// src/autodiff.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "codemark/kernels.hpp"

namespace codemark::ad {

namespace {

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&)> back) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs_grad;
  node.backward = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::ensure_grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.rows, n.value.cols);
}

int Tape::constant(Tensor v) { return push(std::move(v), false, nullptr); }

int Tape::leaf(Tensor v) { return push(std::move(v), true, nullptr); }

void Tape::backward(int loss) {
  const Node& ln = nodes_[loss];
  if (ln.value.rows != 1 || ln.value.cols != 1)
    throw std::invalid_argument("backward() expects a scalar loss node");
  ensure_grad(loss);
  nodes_[loss].grad.at(0, 0) = 1.0;
  for (int i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this);
  }
}

// --- elementwise -------------------------------------------------------------

int Tape::add(int a, int b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  assert(va.same_shape(vb));
  Tensor out = va;
  out += vb;
  const bool req = requires_grad(a) || requires_grad(b);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, b, id](Tape& t) {
      const Tensor& g = t.grad(id);
      if (t.requires_grad(a)) {
        t.ensure_grad(a);
        t.grad_mut(a) += g;
      }
      if (t.requires_grad(b)) {
        t.ensure_grad(b);
        t.grad_mut(b) += g;
      }
    };
  return id;
}

int Tape::sub(int a, int b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  assert(va.same_shape(vb));
  Tensor out = va;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= vb.data[i];
  const bool req = requires_grad(a) || requires_grad(b);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, b, id](Tape& t) {
      const Tensor& g = t.grad(id);
      if (t.requires_grad(a)) {
        t.ensure_grad(a);
        t.grad_mut(a) += g;
      }
      if (t.requires_grad(b)) {
        t.ensure_grad(b);
        Tensor& gb = t.grad_mut(b);
        for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= g.data[i];
      }
    };
  return id;
}

int Tape::mul(int a, int b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  assert(va.same_shape(vb));
  Tensor out = va;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb.data[i];
  const bool req = requires_grad(a) || requires_grad(b);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, b, id](Tape& t) {
      const Tensor& g = t.grad(id);
      if (t.requires_grad(a)) {
        t.ensure_grad(a);
        Tensor& ga = t.grad_mut(a);
        const Tensor& vb2 = t.val(b);
        for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] * vb2.data[i];
      }
      if (t.requires_grad(b)) {
        t.ensure_grad(b);
        Tensor& gb = t.grad_mut(b);
        const Tensor& va2 = t.val(a);
        for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += g.data[i] * va2.data[i];
      }
    };
  return id;
}

int Tape::scale(int a, double c) {
  Tensor out = val(a);
  out *= c;
  const bool req = requires_grad(a);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, c, id](Tape& t) {
      const Tensor& g = t.grad(id);
      t.ensure_grad(a);
      Tensor& ga = t.grad_mut(a);
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += c * g.data[i];
    };
  return id;
}

int Tape::add_row_bias(int a, int bias) {
  const Tensor& va = val(a);
  const Tensor& vb = val(bias);
  assert(vb.rows == 1 && vb.cols == va.cols);
  Tensor out = va;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) += vb.at(0, c);
  const bool req = requires_grad(a) || requires_grad(bias);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, bias, id](Tape& t) {
      const Tensor& g = t.grad(id);
      if (t.requires_grad(a)) {
        t.ensure_grad(a);
        t.grad_mut(a) += g;
      }
      if (t.requires_grad(bias)) {
        t.ensure_grad(bias);
        Tensor& gb = t.grad_mut(bias);
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) gb.at(0, c) += g.at(r, c);
      }
    };
  return id;
}

int Tape::relu(int a) {
  Tensor out = val(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  const bool req = requires_grad(a);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& va = t.val(a);
      t.ensure_grad(a);
      Tensor& ga = t.grad_mut(a);
      for (size_t i = 0; i < ga.data.size(); ++i)
        if (va.data[i] > 0.0) ga.data[i] += g.data[i];
    };
  return id;
}

int Tape::softplus(int a) {
  Tensor out = val(a);
  for (double& v : out.data) v = stable_softplus(v);
  const bool req = requires_grad(a);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& va = t.val(a);
      t.ensure_grad(a);
      Tensor& ga = t.grad_mut(a);
      for (size_t i = 0; i < ga.data.size(); ++i)
        ga.data[i] += g.data[i] * sigmoid(va.data[i]);
    };
  return id;
}

int Tape::log_eps(int a, double eps) {
  Tensor out = val(a);
  for (double& v : out.data) v = std::log(v + eps);
  const bool req = requires_grad(a);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, eps, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& va = t.val(a);
      t.ensure_grad(a);
      Tensor& ga = t.grad_mut(a);
      for (size_t i = 0; i < ga.data.size(); ++i)
        ga.data[i] += g.data[i] / (va.data[i] + eps);
    };
  return id;
}

int Tape::concat_cols(int a, int b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  assert(va.rows == vb.rows);
  Tensor out(va.rows, va.cols + vb.cols);
  for (int r = 0; r < va.rows; ++r) {
    std::copy(va.row(r), va.row(r) + va.cols, out.row(r));
    std::copy(vb.row(r), vb.row(r) + vb.cols, out.row(r) + va.cols);
  }
  const bool req = requires_grad(a) || requires_grad(b);
  const int ca = va.cols, cb = vb.cols;
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, b, ca, cb, id](Tape& t) {
      const Tensor& g = t.grad(id);
      if (t.requires_grad(a)) {
        t.ensure_grad(a);
        Tensor& ga = t.grad_mut(a);
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < ca; ++c) ga.at(r, c) += g.at(r, c);
      }
      if (t.requires_grad(b)) {
        t.ensure_grad(b);
        Tensor& gb = t.grad_mut(b);
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < cb; ++c) gb.at(r, c) += g.at(r, ca + c);
      }
    };
  return id;
}

int Tape::slice_cols(int a, int c0, int len) {
  const Tensor& va = val(a);
  assert(c0 >= 0 && c0 + len <= va.cols);
  Tensor out(va.rows, len);
  for (int r = 0; r < va.rows; ++r)
    std::copy(va.row(r) + c0, va.row(r) + c0 + len, out.row(r));
  const bool req = requires_grad(a);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, c0, len, id](Tape& t) {
      const Tensor& g = t.grad(id);
      t.ensure_grad(a);
      Tensor& ga = t.grad_mut(a);
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < len; ++c) ga.at(r, c0 + c) += g.at(r, c);
    };
  return id;
}

int Tape::row_scale(int a, std::vector<double> weights) {
  const Tensor& va = val(a);
  assert(static_cast<int>(weights.size()) == va.rows);
  Tensor out = va;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) *= weights[r];
  const bool req = requires_grad(a);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, w = std::move(weights), id](Tape& t) {
      const Tensor& g = t.grad(id);
      t.ensure_grad(a);
      Tensor& ga = t.grad_mut(a);
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) ga.at(r, c) += g.at(r, c) * w[r];
    };
  return id;
}

int Tape::add_const_offset(int a, Tensor offset) {
  const Tensor& va = val(a);
  assert(va.same_shape(offset));
  Tensor out = va;
  out += offset;
  const bool req = requires_grad(a);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, id](Tape& t) {
      t.ensure_grad(a);
      t.grad_mut(a) += t.grad(id);
    };
  return id;
}

int Tape::mix_rows(int a, Tensor passthrough, std::vector<uint8_t> take_a) {
  const Tensor& va = val(a);
  assert(va.same_shape(passthrough));
  assert(static_cast<int>(take_a.size()) == va.rows);
  Tensor out = std::move(passthrough);
  for (int r = 0; r < va.rows; ++r)
    if (take_a[r]) std::copy(va.row(r), va.row(r) + va.cols, out.row(r));
  const bool req = requires_grad(a);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, take = std::move(take_a), id](Tape& t) {
      const Tensor& g = t.grad(id);
      t.ensure_grad(a);
      Tensor& ga = t.grad_mut(a);
      for (int r = 0; r < g.rows; ++r)
        if (take[r])
          for (int c = 0; c < g.cols; ++c) ga.at(r, c) += g.at(r, c);
    };
  return id;
}

// --- linear algebra ------------------------------------------------------------

int Tape::matmul(int a, int b, bool trans_a, bool trans_b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  const int m = trans_a ? va.cols : va.rows;
  const int kk = trans_a ? va.rows : va.cols;
  const int kb = trans_b ? vb.cols : vb.rows;
  const int n = trans_b ? vb.rows : vb.cols;
  if (kk != kb) throw std::invalid_argument("matmul inner dimensions differ");
  Tensor out(m, n);
  kernels::gemm(trans_a, trans_b, m, n, kk, 1.0, va.data.data(), va.cols,
                vb.data.data(), vb.cols, 0.0, out.data.data(), n);
  const bool req = requires_grad(a) || requires_grad(b);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, b, trans_a, trans_b, m, n, kk, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& va2 = t.val(a);
      const Tensor& vb2 = t.val(b);
      if (t.requires_grad(a)) {
        t.ensure_grad(a);
        Tensor& ga = t.grad_mut(a);
        if (!trans_a && !trans_b)  // dA = G B^T
          kernels::gemm(false, true, m, kk, n, 1.0, g.data.data(), n, vb2.data.data(), vb2.cols,
                        1.0, ga.data.data(), ga.cols);
        else if (trans_a && !trans_b)  // dA = B G^T
          kernels::gemm(false, true, kk, m, n, 1.0, vb2.data.data(), vb2.cols, g.data.data(), n,
                        1.0, ga.data.data(), ga.cols);
        else if (!trans_a && trans_b)  // dA = G B
          kernels::gemm(false, false, m, kk, n, 1.0, g.data.data(), n, vb2.data.data(), vb2.cols,
                        1.0, ga.data.data(), ga.cols);
        else  // dA = B^T G^T
          kernels::gemm(true, true, kk, m, n, 1.0, vb2.data.data(), vb2.cols, g.data.data(), n,
                        1.0, ga.data.data(), ga.cols);
      }
      if (t.requires_grad(b)) {
        t.ensure_grad(b);
        Tensor& gb = t.grad_mut(b);
        if (!trans_a && !trans_b)  // dB = A^T G
          kernels::gemm(true, false, kk, n, m, 1.0, va2.data.data(), va2.cols, g.data.data(), n,
                        1.0, gb.data.data(), gb.cols);
        else if (trans_a && !trans_b)  // dB = A G
          kernels::gemm(false, false, kk, n, m, 1.0, va2.data.data(), va2.cols, g.data.data(), n,
                        1.0, gb.data.data(), gb.cols);
        else if (!trans_a && trans_b)  // dB = G^T A
          kernels::gemm(true, false, n, kk, m, 1.0, g.data.data(), n, va2.data.data(), va2.cols,
                        1.0, gb.data.data(), gb.cols);
        else  // dB = G^T A^T
          kernels::gemm(true, true, n, kk, m, 1.0, g.data.data(), n, va2.data.data(), va2.cols,
                        1.0, gb.data.data(), gb.cols);
      }
    };
  return id;
}

int Tape::conv1d(int x, int w, int bias, int k, int dilation) {
  const Tensor& vx = val(x);
  const Tensor& vw = val(w);
  const int c_in = vx.cols;
  const int c_out = vw.rows;
  assert(vw.cols == c_in * k);
  const double* bias_ptr = bias >= 0 ? val(bias).data.data() : nullptr;
  Tensor out(vx.rows, c_out);
  kernels::conv1d_forward(vx.data.data(), vx.rows, c_in, vw.data.data(), bias_ptr, c_out, k,
                          dilation, out.data.data());
  const bool req = requires_grad(x) || requires_grad(w) || (bias >= 0 && requires_grad(bias));
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [x, w, bias, k, dilation, c_in, c_out, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& vx2 = t.val(x);
      const Tensor& vw2 = t.val(w);
      if (t.requires_grad(x)) {
        t.ensure_grad(x);
        kernels::conv1d_backward_input(g.data.data(), g.rows, c_out, vw2.data.data(), c_in, k,
                                       dilation, t.grad_mut(x).data.data());
      }
      const bool need_w = t.requires_grad(w);
      const bool need_b = bias >= 0 && t.requires_grad(bias);
      if (need_w || need_b) {
        if (need_w) t.ensure_grad(w);
        if (need_b) t.ensure_grad(bias);
        Tensor scratch_w;
        double* gw = need_w ? t.grad_mut(w).data.data() : nullptr;
        if (!need_w) {
          scratch_w = Tensor::zeros(c_out, c_in * k);
          gw = scratch_w.data.data();
        }
        kernels::conv1d_backward_weight(vx2.data.data(), g.data.data(), g.rows, c_in, c_out, k,
                                        dilation, gw,
                                        need_b ? t.grad_mut(bias).data.data() : nullptr);
      }
    };
  return id;
}

int Tape::layer_norm(int x, int gain, int bias, double eps) {
  const Tensor& vx = val(x);
  const Tensor& vg = val(gain);
  const Tensor& vb = val(bias);
  assert(vg.rows == 1 && vg.cols == vx.cols && vb.rows == 1 && vb.cols == vx.cols);
  const int c = vx.cols;
  Tensor out(vx.rows, c);
  Tensor xhat(vx.rows, c);
  std::vector<double> inv_sigma(vx.rows);
  for (int r = 0; r < vx.rows; ++r) {
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += vx.at(r, j);
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      const double d = vx.at(r, j) - mu;
      var += d * d;
    }
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (int j = 0; j < c; ++j) {
      const double xh = (vx.at(r, j) - mu) * is;
      xhat.at(r, j) = xh;
      out.at(r, j) = vg.at(0, j) * xh + vb.at(0, j);
    }
  }
  const bool req = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [x, gain, bias, c, xh = std::move(xhat),
                           is = std::move(inv_sigma), id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& vg2 = t.val(gain);
      if (t.requires_grad(gain)) {
        t.ensure_grad(gain);
        Tensor& gg = t.grad_mut(gain);
        for (int r = 0; r < g.rows; ++r)
          for (int j = 0; j < c; ++j) gg.at(0, j) += g.at(r, j) * xh.at(r, j);
      }
      if (t.requires_grad(bias)) {
        t.ensure_grad(bias);
        Tensor& gb = t.grad_mut(bias);
        for (int r = 0; r < g.rows; ++r)
          for (int j = 0; j < c; ++j) gb.at(0, j) += g.at(r, j);
      }
      if (t.requires_grad(x)) {
        t.ensure_grad(x);
        Tensor& gx = t.grad_mut(x);
        for (int r = 0; r < g.rows; ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (int j = 0; j < c; ++j) {
            const double d = g.at(r, j) * vg2.at(0, j);
            mean_d += d;
            mean_dx += d * xh.at(r, j);
          }
          mean_d /= c;
          mean_dx /= c;
          for (int j = 0; j < c; ++j) {
            const double d = g.at(r, j) * vg2.at(0, j);
            gx.at(r, j) += is[r] * (d - mean_d - xh.at(r, j) * mean_dx);
          }
        }
      }
    };
  return id;
}

int Tape::embedding(int table, std::vector<int> ids) {
  const Tensor& vt = val(table);
  Tensor out(static_cast<int>(ids.size()), vt.cols);
  for (size_t r = 0; r < ids.size(); ++r) {
    assert(ids[r] >= 0 && ids[r] < vt.rows);
    std::copy(vt.row(ids[r]), vt.row(ids[r]) + vt.cols, out.row(static_cast<int>(r)));
  }
  const bool req = requires_grad(table);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [table, idx = std::move(ids), id](Tape& t) {
      const Tensor& g = t.grad(id);
      t.ensure_grad(table);
      Tensor& gt = t.grad_mut(table);
      for (size_t r = 0; r < idx.size(); ++r) {
        double* dst = gt.row(idx[r]);
        const double* src = g.row(static_cast<int>(r));
        for (int c = 0; c < g.cols; ++c) dst[c] += src[c];
      }
    };
  return id;
}

int Tape::softmax_rows(int a) {
  const Tensor& va = val(a);
  Tensor out(va.rows, va.cols);
  for (int r = 0; r < va.rows; ++r) {
    double mx = va.at(r, 0);
    for (int c = 1; c < va.cols; ++c) mx = std::max(mx, va.at(r, c));
    double z = 0.0;
    for (int c = 0; c < va.cols; ++c) {
      const double e = std::exp(va.at(r, c) - mx);
      out.at(r, c) = e;
      z += e;
    }
    for (int c = 0; c < va.cols; ++c) out.at(r, c) /= z;
  }
  const bool req = requires_grad(a);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& y = t.val(id);
      t.ensure_grad(a);
      Tensor& ga = t.grad_mut(a);
      for (int r = 0; r < g.rows; ++r) {
        double dot = 0.0;
        for (int c = 0; c < g.cols; ++c) dot += g.at(r, c) * y.at(r, c);
        for (int c = 0; c < g.cols; ++c)
          ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
      }
    };
  return id;
}

// --- reductions / losses -------------------------------------------------------

int Tape::mse(int a, int b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  assert(va.same_shape(vb));
  const double m = static_cast<double>(va.size());
  double acc = 0.0;
  for (size_t i = 0; i < va.data.size(); ++i) {
    const double d = va.data[i] - vb.data[i];
    acc += d * d;
  }
  Tensor out(1, 1, acc / m);
  const bool req = requires_grad(a) || requires_grad(b);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, b, m, id](Tape& t) {
      const double g = t.grad(id).at(0, 0);
      const Tensor& va2 = t.val(a);
      const Tensor& vb2 = t.val(b);
      if (t.requires_grad(a)) {
        t.ensure_grad(a);
        Tensor& ga = t.grad_mut(a);
        for (size_t i = 0; i < ga.data.size(); ++i)
          ga.data[i] += g * 2.0 * (va2.data[i] - vb2.data[i]) / m;
      }
      if (t.requires_grad(b)) {
        t.ensure_grad(b);
        Tensor& gb = t.grad_mut(b);
        for (size_t i = 0; i < gb.data.size(); ++i)
          gb.data[i] -= g * 2.0 * (va2.data[i] - vb2.data[i]) / m;
      }
    };
  return id;
}

int Tape::l1(int a, int b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  assert(va.same_shape(vb));
  const double m = static_cast<double>(va.size());
  double acc = 0.0;
  for (size_t i = 0; i < va.data.size(); ++i) acc += std::abs(va.data[i] - vb.data[i]);
  Tensor out(1, 1, acc / m);
  const bool req = requires_grad(a) || requires_grad(b);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, b, m, id](Tape& t) {
      const double g = t.grad(id).at(0, 0);
      const Tensor& va2 = t.val(a);
      const Tensor& vb2 = t.val(b);
      for (int which = 0; which < 2; ++which) {
        const int node = which == 0 ? a : b;
        const double sgn_mult = which == 0 ? 1.0 : -1.0;
        if (!t.requires_grad(node)) continue;
        t.ensure_grad(node);
        Tensor& gn = t.grad_mut(node);
        for (size_t i = 0; i < gn.data.size(); ++i) {
          const double d = va2.data[i] - vb2.data[i];
          const double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
          gn.data[i] += g * sgn_mult * s / m;
        }
      }
    };
  return id;
}

int Tape::mean_all(int a) {
  const Tensor& va = val(a);
  const double m = static_cast<double>(va.size());
  double acc = 0.0;
  for (double v : va.data) acc += v;
  Tensor out(1, 1, acc / m);
  const bool req = requires_grad(a);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, m, id](Tape& t) {
      const double g = t.grad(id).at(0, 0);
      t.ensure_grad(a);
      Tensor& ga = t.grad_mut(a);
      for (double& v : ga.data) v += g / m;
    };
  return id;
}

int Tape::fro_norm(int a) {
  const Tensor& va = val(a);
  double acc = 0.0;
  for (double v : va.data) acc += v * v;
  const double norm = std::sqrt(acc);
  Tensor out(1, 1, norm);
  const bool req = requires_grad(a);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, norm, id](Tape& t) {
      const double g = t.grad(id).at(0, 0);
      const Tensor& va2 = t.val(a);
      t.ensure_grad(a);
      Tensor& ga = t.grad_mut(a);
      const double denom = std::max(norm, 1e-12);
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g * va2.data[i] / denom;
    };
  return id;
}

int Tape::cross_entropy_rows(int logits, std::vector<int> targets,
                             std::vector<double> row_weights) {
  const Tensor& vl = val(logits);
  assert(static_cast<int>(targets.size()) == vl.rows);
  assert(static_cast<int>(row_weights.size()) == vl.rows);
  double wsum = 0.0;
  for (double w : row_weights) wsum += w;
  const double denom = wsum > 0 ? wsum : 1.0;
  double loss = 0.0;
  for (int r = 0; r < vl.rows; ++r) {
    if (row_weights[r] == 0.0) continue;
    double mx = vl.at(r, 0);
    for (int c = 1; c < vl.cols; ++c) mx = std::max(mx, vl.at(r, c));
    double z = 0.0;
    for (int c = 0; c < vl.cols; ++c) z += std::exp(vl.at(r, c) - mx);
    loss += row_weights[r] * (std::log(z) + mx - vl.at(r, targets[r]));
  }
  Tensor out(1, 1, loss / denom);
  const bool req = requires_grad(logits);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [logits, tg = std::move(targets), w = std::move(row_weights),
                           denom, id](Tape& t) {
      const double g = t.grad(id).at(0, 0);
      const Tensor& vl2 = t.val(logits);
      t.ensure_grad(logits);
      Tensor& gl = t.grad_mut(logits);
      for (int r = 0; r < vl2.rows; ++r) {
        if (w[r] == 0.0) continue;
        double mx = vl2.at(r, 0);
        for (int c = 1; c < vl2.cols; ++c) mx = std::max(mx, vl2.at(r, c));
        double z = 0.0;
        for (int c = 0; c < vl2.cols; ++c) z += std::exp(vl2.at(r, c) - mx);
        const double scale = g * w[r] / denom;
        for (int c = 0; c < vl2.cols; ++c) {
          const double p = std::exp(vl2.at(r, c) - mx) / z;
          gl.at(r, c) += scale * (p - (c == tg[r] ? 1.0 : 0.0));
        }
      }
    };
  return id;
}

int Tape::bce_logits_rows(int logits, std::vector<double> targets,
                          std::vector<double> row_weights) {
  const Tensor& vl = val(logits);
  assert(vl.cols == 1);
  assert(static_cast<int>(targets.size()) == vl.rows);
  assert(static_cast<int>(row_weights.size()) == vl.rows);
  double wsum = 0.0;
  for (double w : row_weights) wsum += w;
  const double denom = wsum > 0 ? wsum : 1.0;
  double loss = 0.0;
  for (int r = 0; r < vl.rows; ++r) {
    if (row_weights[r] == 0.0) continue;
    const double x = vl.at(r, 0), y = targets[r];
    loss += row_weights[r] * (std::max(x, 0.0) - x * y + stable_softplus(-std::abs(x)));
  }
  Tensor out(1, 1, loss / denom);
  const bool req = requires_grad(logits);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [logits, tg = std::move(targets), w = std::move(row_weights),
                           denom, id](Tape& t) {
      const double g = t.grad(id).at(0, 0);
      const Tensor& vl2 = t.val(logits);
      t.ensure_grad(logits);
      Tensor& gl = t.grad_mut(logits);
      for (int r = 0; r < vl2.rows; ++r) {
        if (w[r] == 0.0) continue;
        gl.at(r, 0) += g * w[r] / denom * (sigmoid(vl2.at(r, 0)) - tg[r]);
      }
    };
  return id;
}

int Tape::s_add(int a, int b) {
  Tensor out(1, 1, val(a).at(0, 0) + val(b).at(0, 0));
  const bool req = requires_grad(a) || requires_grad(b);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, b, id](Tape& t) {
      const double g = t.grad(id).at(0, 0);
      for (int node : {a, b})
        if (t.requires_grad(node)) {
          t.ensure_grad(node);
          t.grad_mut(node).at(0, 0) += g;
        }
    };
  return id;
}

int Tape::s_scale(int a, double c) { return scale(a, c); }

int Tape::s_div(int a, int b) {
  const double vb = val(b).at(0, 0);
  Tensor out(1, 1, val(a).at(0, 0) / vb);
  const bool req = requires_grad(a) || requires_grad(b);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [a, b, id](Tape& t) {
      const double g = t.grad(id).at(0, 0);
      const double va2 = t.val(a).at(0, 0);
      const double vb2 = t.val(b).at(0, 0);
      if (t.requires_grad(a)) {
        t.ensure_grad(a);
        t.grad_mut(a).at(0, 0) += g / vb2;
      }
      if (t.requires_grad(b)) {
        t.ensure_grad(b);
        t.grad_mut(b).at(0, 0) -= g * va2 / (vb2 * vb2);
      }
    };
  return id;
}

// --- audio-coupled ops -----------------------------------------------------------

int Tape::stft_magnitude(int wave, const audio::StftConfig& cfg) {
  const Tensor& vw = val(wave);
  assert(vw.cols == 1);
  std::vector<double> x(vw.data.begin(), vw.data.end());
  int t_frames = 0;
  auto frames = std::make_shared<std::vector<std::complex<double>>>();
  audio::detail::stft_complex(x, cfg, &t_frames, *frames);
  const int bins = cfg.bins();
  Tensor out(t_frames, bins);
  for (int t = 0; t < t_frames; ++t)
    for (int f = 0; f < bins; ++f)
      out.at(t, f) = std::abs((*frames)[static_cast<size_t>(t) * bins + f]);
  const bool req = requires_grad(wave);
  const int x_len = vw.rows;
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [wave, cfg, frames, t_frames, bins, x_len, id](Tape& t) {
      const Tensor& g = t.grad(id);
      std::vector<std::complex<double>> gbins(static_cast<size_t>(t_frames) * bins);
      for (int tt = 0; tt < t_frames; ++tt) {
        for (int f = 0; f < bins; ++f) {
          const auto& c = (*frames)[static_cast<size_t>(tt) * bins + f];
          const double mag = std::abs(c);
          if (mag < 1e-12) {
            gbins[static_cast<size_t>(tt) * bins + f] = {0.0, 0.0};
          } else {
            const double gm = g.at(tt, f) / mag;
            gbins[static_cast<size_t>(tt) * bins + f] = {gm * c.real(), gm * c.imag()};
          }
        }
      }
      const auto gx = audio::detail::stft_adjoint(gbins, t_frames, cfg, x_len);
      t.ensure_grad(wave);
      Tensor& gw = t.grad_mut(wave);
      for (int i = 0; i < x_len; ++i) gw.at(i, 0) += gx[i];
    };
  return id;
}

int Tape::istft_fixed_phase(int mag, Tensor phase, const audio::StftConfig& cfg, int out_len) {
  const Tensor& vm = val(mag);
  assert(vm.same_shape(phase));
  const int t_frames = vm.rows;
  const int bins = cfg.bins();
  std::vector<std::complex<double>> frames(static_cast<size_t>(t_frames) * bins);
  for (int t = 0; t < t_frames; ++t)
    for (int f = 0; f < bins; ++f)
      frames[static_cast<size_t>(t) * bins + f] = std::polar(vm.at(t, f), phase.at(t, f));
  const auto y = audio::detail::istft_from_complex(frames, t_frames, cfg, out_len);
  Tensor out(out_len, 1);
  for (int i = 0; i < out_len; ++i) out.at(i, 0) = y[i];
  const bool req = requires_grad(mag);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [mag, ph = std::move(phase), cfg, out_len, id](Tape& t) {
      const Tensor& g = t.grad(id);
      std::vector<double> gy(out_len);
      for (int i = 0; i < out_len; ++i) gy[i] = g.at(i, 0);
      const Tensor gm = audio::detail::istft_adjoint_magnitude(gy, ph, cfg);
      t.ensure_grad(mag);
      t.grad_mut(mag) += gm;
    };
  return id;
}

int Tape::external_scalar(int x, double value, Tensor grad_wrt_x) {
  assert(grad_wrt_x.same_shape(val(x)));
  const bool req = requires_grad(x);
  int id = push(Tensor(1, 1, value), req, nullptr);
  if (req)
    nodes_[id].backward = [x, g = std::move(grad_wrt_x), id](Tape& t) {
      const double scale = t.grad(id).at(0, 0);
      t.ensure_grad(x);
      Tensor& gx = t.grad_mut(x);
      for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += scale * g.data[i];
    };
  return id;
}

int Tape::distort(int wave, const attacks::DistortionSpec& spec, int sample_rate) {
  const Tensor& vw = val(wave);
  assert(vw.cols == 1);
  audio::Waveform in;
  in.sample_rate = sample_rate;
  in.samples.assign(vw.data.begin(), vw.data.end());
  auto info = std::make_shared<attacks::GradInfo>();
  const audio::Waveform distorted = attacks::apply(in, spec, info.get());
  Tensor out(static_cast<int>(distorted.samples.size()), 1);
  for (int i = 0; i < out.rows; ++i) out.at(i, 0) = distorted.samples[i];
  const bool req = requires_grad(wave);
  int id = push(std::move(out), req, nullptr);
  if (req)
    nodes_[id].backward = [wave, info, id](Tape& t) {
      const Tensor& g = t.grad(id);
      std::vector<double> gout(g.data.begin(), g.data.end());
      const auto gin = attacks::backpropagate(gout, *info);
      t.ensure_grad(wave);
      Tensor& gw = t.grad_mut(wave);
      const size_t n = std::min(gin.size(), gw.data.size());
      for (size_t i = 0; i < n; ++i) gw.data[i] += gin[i];
    };
  return id;
}

}  // namespace codemark::ad
