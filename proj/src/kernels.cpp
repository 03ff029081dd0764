// src/kernels.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/kernels.hpp"

#include <atomic>
#include <cassert>

namespace codemark::kernels {

namespace {
std::atomic<Execution> g_execution{Execution::parallel};
}

void set_execution(Execution e) { g_execution.store(e); }
Execution execution() { return g_execution.load(); }

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
  const bool par = execution() == Execution::parallel;
#pragma omp parallel for if (par) schedule(static)
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * ldc;
    if (beta == 0.0) {
      for (int j = 0; j < n; ++j) crow[j] = 0.0;
    } else if (beta != 1.0) {
      for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    if (!trans_b) {
      // accumulate row i of op(A) against rows of B; unit-stride in j
      for (int p = 0; p < k; ++p) {
        const double av = trans_a ? a[static_cast<size_t>(p) * lda + i]
                                  : a[static_cast<size_t>(i) * lda + p];
        if (av == 0.0) continue;
        const double s = alpha * av;
        const double* brow = b + static_cast<size_t>(p) * ldb;
        for (int j = 0; j < n; ++j) crow[j] += s * brow[j];
      }
    } else {
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        const double* bcol = b + static_cast<size_t>(j) * ldb;
        if (trans_a) {
          for (int p = 0; p < k; ++p) acc += a[static_cast<size_t>(p) * lda + i] * bcol[p];
        } else {
          const double* arow = a + static_cast<size_t>(i) * lda;
          for (int p = 0; p < k; ++p) acc += arow[p] * bcol[p];
        }
        crow[j] += alpha * acc;
      }
    }
  }
}

void conv1d_forward(const double* x, int t_len, int c_in, const double* w,
                    const double* bias, int c_out, int k, int dilation, double* y) {
  assert(k % 2 == 1);
  const int half = k / 2;
  const bool par = execution() == Execution::parallel;
#pragma omp parallel for if (par) schedule(static)
  for (int t = 0; t < t_len; ++t) {
    double* yrow = y + static_cast<size_t>(t) * c_out;
    for (int co = 0; co < c_out; ++co) yrow[co] = bias ? bias[co] : 0.0;
    for (int j = 0; j < k; ++j) {
      const int ts = t + (j - half) * dilation;
      if (ts < 0 || ts >= t_len) continue;
      const double* xrow = x + static_cast<size_t>(ts) * c_in;
      for (int co = 0; co < c_out; ++co) {
        const double* wrow = w + static_cast<size_t>(co) * (c_in * k) + static_cast<size_t>(j) * c_in;
        double acc = 0.0;
        for (int ci = 0; ci < c_in; ++ci) acc += xrow[ci] * wrow[ci];
        yrow[co] += acc;
      }
    }
  }
}

void conv1d_backward_input(const double* gy, int t_len, int c_out, const double* w,
                           int c_in, int k, int dilation, double* gx) {
  const int half = k / 2;
  const bool par = execution() == Execution::parallel;
#pragma omp parallel for if (par) schedule(static)
  for (int t = 0; t < t_len; ++t) {
    double* gxrow = gx + static_cast<size_t>(t) * c_in;
    for (int j = 0; j < k; ++j) {
      // x[t] fed y[t'] with t = t' + (j-half)*dilation
      const int tp = t - (j - half) * dilation;
      if (tp < 0 || tp >= t_len) continue;
      const double* gyrow = gy + static_cast<size_t>(tp) * c_out;
      for (int co = 0; co < c_out; ++co) {
        const double g = gyrow[co];
        if (g == 0.0) continue;
        const double* wrow = w + static_cast<size_t>(co) * (c_in * k) + static_cast<size_t>(j) * c_in;
        for (int ci = 0; ci < c_in; ++ci) gxrow[ci] += g * wrow[ci];
      }
    }
  }
}

void conv1d_backward_weight(const double* x, const double* gy, int t_len, int c_in,
                            int c_out, int k, int dilation, double* gw, double* gbias) {
  const int half = k / 2;
  const bool par = execution() == Execution::parallel;
#pragma omp parallel for if (par) schedule(static)
  for (int co = 0; co < c_out; ++co) {
    double* gwrow = gw + static_cast<size_t>(co) * (c_in * k);
    double gb = 0.0;
    for (int t = 0; t < t_len; ++t) {
      const double g = gy[static_cast<size_t>(t) * c_out + co];
      gb += g;
      if (g == 0.0) continue;
      for (int j = 0; j < k; ++j) {
        const int ts = t + (j - half) * dilation;
        if (ts < 0 || ts >= t_len) continue;
        const double* xrow = x + static_cast<size_t>(ts) * c_in;
        double* gwj = gwrow + static_cast<size_t>(j) * c_in;
        for (int ci = 0; ci < c_in; ++ci) gwj[ci] += g * xrow[ci];
      }
    }
    if (gbias) gbias[co] += gb;
  }
}

void nearest_entry(const double* z, int t_len, int d, const double* codebook,
                   int k_entries, int* ids, double* dist2) {
  const bool par = execution() == Execution::parallel;
#pragma omp parallel for if (par) schedule(static)
  for (int t = 0; t < t_len; ++t) {
    const double* zrow = z + static_cast<size_t>(t) * d;
    int best = 0;
    double best_d = 0.0;
    for (int kk = 0; kk < k_entries; ++kk) {
      const double* e = codebook + static_cast<size_t>(kk) * d;
      double acc = 0.0;
      for (int i = 0; i < d; ++i) {
        const double diff = zrow[i] - e[i];
        acc += diff * diff;
      }
      if (kk == 0 || acc < best_d) {  // strict < keeps the lowest id on ties
        best_d = acc;
        best = kk;
      }
    }
    ids[t] = best;
    if (dist2) dist2[t] = best_d;
  }
}

}  // namespace codemark::kernels
