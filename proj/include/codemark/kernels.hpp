// include/codemark/kernels.hpp
// Hot inner loops used by the networks and the quantizer. Each kernel has a
// serial reference implementation and an OpenMP-parallel implementation that
// produce bit-identical results: parallel loops split over independent output
// elements and every output is accumulated serially inside one iteration, so
// the floating-point summation order never depends on the thread count.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>

namespace codemark::kernels {

enum class Execution { serial, parallel };

// Process-wide switch, default parallel. Thread-safe to read; set it once at
// startup (the benchmark flips it between timed sections).
void set_execution(Execution e);
Execution execution();

// C(m x n) = alpha * op(A) * op(B) + beta * C
// op(A) is A (m x k, lda) or A^T of a (k x m, lda) matrix when trans_a.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc);

// 1-D convolution over time with same (zero) padding, odd kernel size.
//   x: T x c_in row-major, w: c_out x (c_in * k), bias: c_out or nullptr,
//   y: T x c_out (overwritten).
void conv1d_forward(const double* x, int t_len, int c_in, const double* w,
                    const double* bias, int c_out, int k, int dilation, double* y);

// gx (T x c_in) += dL/dx given gy (T x c_out).
void conv1d_backward_input(const double* gy, int t_len, int c_out, const double* w,
                           int c_in, int k, int dilation, double* gx);

// gw (c_out x c_in*k) += dL/dw, gbias (c_out) += dL/dbias (gbias may be null).
void conv1d_backward_weight(const double* x, const double* gy, int t_len, int c_in,
                            int c_out, int k, int dilation, double* gw, double* gbias);

// Nearest codebook entry per frame by squared Euclidean distance.
// Ties resolve to the lowest id. ids: T ints, dist2 (optional): T doubles.
void nearest_entry(const double* z, int t_len, int d, const double* codebook,
                   int k_entries, int* ids, double* dist2);

}  // namespace codemark::kernels
