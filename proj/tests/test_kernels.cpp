// tests/test_kernels.cpp
// The parallel kernels must match the serial reference bit for bit.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "codemark/kernels.hpp"
#include "codemark/rng.hpp"

using namespace codemark;

namespace {

std::vector<double> random_vec(int n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// textbook triple loop, trusted reference
void naive_gemm(bool ta, bool tb, int m, int n, int k, const std::vector<double>& a, int lda,
                const std::vector<double>& b, int ldb, std::vector<double>& c, int ldc) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) {
        const double av = ta ? a[p * lda + i] : a[i * lda + p];
        const double bv = tb ? b[j * ldb + p] : b[p * ldb + j];
        acc += av * bv;
      }
      c[i * ldc + j] = acc;
    }
}

}  // namespace

TEST_CASE("gemm matches the naive reference in all transpose modes") {
  Rng rng(7);
  const int m = 13, n = 17, k = 11;
  for (int mode = 0; mode < 4; ++mode) {
    const bool ta = mode & 1, tb = mode & 2;
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);
    const int lda = ta ? m : k;
    const int ldb = tb ? k : n;
    std::vector<double> expect(m * n, 0.0), got(m * n, 0.0);
    naive_gemm(ta, tb, m, n, k, a, lda, b, ldb, expect, n);
    kernels::gemm(ta, tb, m, n, k, 1.0, a.data(), lda, b.data(), ldb, 0.0, got.data(), n);
    for (int i = 0; i < m * n; ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("parallel kernels match serial bit for bit") {
  Rng rng(11);
  const int t_len = 61, c_in = 9, c_out = 7, k = 3, dil = 2;
  const auto x = random_vec(t_len * c_in, rng);
  const auto w = random_vec(c_out * c_in * k, rng);
  const auto bias = random_vec(c_out, rng);
  const auto gy = random_vec(t_len * c_out, rng);

  auto run_all = [&] {
    std::vector<double> y(t_len * c_out, 0.0), gx(t_len * c_in, 0.0);
    std::vector<double> gw(c_out * c_in * k, 0.0), gb(c_out, 0.0);
    kernels::conv1d_forward(x.data(), t_len, c_in, w.data(), bias.data(), c_out, k, dil, y.data());
    kernels::conv1d_backward_input(gy.data(), t_len, c_out, w.data(), c_in, k, dil, gx.data());
    kernels::conv1d_backward_weight(x.data(), gy.data(), t_len, c_in, c_out, k, dil, gw.data(),
                                    gb.data());
    std::vector<double> all;
    all.insert(all.end(), y.begin(), y.end());
    all.insert(all.end(), gx.begin(), gx.end());
    all.insert(all.end(), gw.begin(), gw.end());
    all.insert(all.end(), gb.begin(), gb.end());
    return all;
  };

  kernels::set_execution(kernels::Execution::serial);
  const auto serial = run_all();
  kernels::set_execution(kernels::Execution::parallel);
  const auto parallel = run_all();
  REQUIRE(serial.size() == parallel.size());
  for (size_t i = 0; i < serial.size(); ++i) CHECK(serial[i] == parallel[i]);

  // gemm too
  const int m = 33, n = 29, kk = 31;
  const auto a = random_vec(m * kk, rng);
  const auto b = random_vec(kk * n, rng);
  std::vector<double> c1(m * n, 0.0), c2(m * n, 0.0);
  kernels::set_execution(kernels::Execution::serial);
  kernels::gemm(false, false, m, n, kk, 1.0, a.data(), kk, b.data(), n, 0.0, c1.data(), n);
  kernels::set_execution(kernels::Execution::parallel);
  kernels::gemm(false, false, m, n, kk, 1.0, a.data(), kk, b.data(), n, 0.0, c2.data(), n);
  for (int i = 0; i < m * n; ++i) CHECK(c1[i] == c2[i]);
}

TEST_CASE("nearest_entry matches an exhaustive scan and breaks ties low") {
  Rng rng(3);
  const int t_len = 50, d = 8, k = 16;
  const auto z = random_vec(t_len * d, rng);
  const auto cb = random_vec(k * d, rng);
  std::vector<int> ids(t_len);
  kernels::nearest_entry(z.data(), t_len, d, cb.data(), k, ids.data(), nullptr);
  for (int t = 0; t < t_len; ++t) {
    int best = 0;
    double best_d = 1e300;
    for (int e = 0; e < k; ++e) {
      double acc = 0.0;
      for (int i = 0; i < d; ++i) {
        const double diff = z[t * d + i] - cb[e * d + i];
        acc += diff * diff;
      }
      if (acc < best_d) {
        best_d = acc;
        best = e;
      }
    }
    CHECK(ids[t] == best);
  }

  // exact tie between duplicated entries resolves to the lowest id
  std::vector<double> cb2 = cb;
  for (int i = 0; i < d; ++i) cb2[5 * d + i] = cb2[12 * d + i] = z[0 * d + i];
  kernels::nearest_entry(z.data(), 1, d, cb2.data(), k, ids.data(), nullptr);
  CHECK(ids[0] == 5);
}

TEST_CASE("serial/parallel agreement holds for nearest_entry") {
  Rng rng(5);
  const int t_len = 200, d = 16, k = 32;
  const auto z = random_vec(t_len * d, rng);
  const auto cb = random_vec(k * d, rng);
  std::vector<int> ids1(t_len), ids2(t_len);
  std::vector<double> d1(t_len), d2(t_len);
  kernels::set_execution(kernels::Execution::serial);
  kernels::nearest_entry(z.data(), t_len, d, cb.data(), k, ids1.data(), d1.data());
  kernels::set_execution(kernels::Execution::parallel);
  kernels::nearest_entry(z.data(), t_len, d, cb.data(), k, ids2.data(), d2.data());
  for (int t = 0; t < t_len; ++t) {
    CHECK(ids1[t] == ids2[t]);
    CHECK(d1[t] == d2[t]);
  }
}
