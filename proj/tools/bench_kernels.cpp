// tools/bench_kernels.cpp
// Times the serial reference kernels against the OpenMP-parallel versions and
// verifies the outputs stay bit-identical while doing so.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "codemark/kernels.hpp"
#include "codemark/rng.hpp"

using namespace codemark;
using clock_type = std::chrono::steady_clock;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = clock_type::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = clock_type::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
  std::printf("%-28s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   bitwise %s\n", name,
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
              identical ? "equal" : "DIFFER");
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", omp_get_max_threads());
  Rng rng(42);

  {  // gemm 384 x 384 x 384
    const int n = 384;
    const auto a = random_vec(static_cast<size_t>(n) * n, rng);
    const auto b = random_vec(static_cast<size_t>(n) * n, rng);
    std::vector<double> c1(static_cast<size_t>(n) * n), c2(c1.size());
    auto run = [&](std::vector<double>& c) {
      kernels::gemm(false, false, n, n, n, 1.0, a.data(), n, b.data(), n, 0.0, c.data(), n);
    };
    kernels::set_execution(kernels::Execution::serial);
    const double ts = time_of([&] { run(c1); }, 3);
    kernels::set_execution(kernels::Execution::parallel);
    const double tp = time_of([&] { run(c2); }, 3);
    report("gemm 384^3", ts, tp, c1 == c2);
  }

  {  // conv1d forward, training-shaped
    const int t_len = 512, c_in = 128, c_out = 128, k = 3;
    const auto x = random_vec(static_cast<size_t>(t_len) * c_in, rng);
    const auto w = random_vec(static_cast<size_t>(c_out) * c_in * k, rng);
    const auto bias = random_vec(c_out, rng);
    std::vector<double> y1(static_cast<size_t>(t_len) * c_out), y2(y1.size());
    auto run = [&](std::vector<double>& y) {
      kernels::conv1d_forward(x.data(), t_len, c_in, w.data(), bias.data(), c_out, k, 1, y.data());
    };
    kernels::set_execution(kernels::Execution::serial);
    const double ts = time_of([&] { run(y1); }, 5);
    kernels::set_execution(kernels::Execution::parallel);
    const double tp = time_of([&] { run(y2); }, 5);
    report("conv1d 512x128->128 k3", ts, tp, y1 == y2);
  }

  {  // conv1d weight gradient
    const int t_len = 512, c_in = 128, c_out = 128, k = 3;
    const auto x = random_vec(static_cast<size_t>(t_len) * c_in, rng);
    const auto gy = random_vec(static_cast<size_t>(t_len) * c_out, rng);
    std::vector<double> gw1(static_cast<size_t>(c_out) * c_in * k), gw2(gw1.size());
    std::vector<double> gb1(c_out), gb2(c_out);
    auto run = [&](std::vector<double>& gw, std::vector<double>& gb) {
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      kernels::conv1d_backward_weight(x.data(), gy.data(), t_len, c_in, c_out, k, 1, gw.data(),
                                      gb.data());
    };
    kernels::set_execution(kernels::Execution::serial);
    const double ts = time_of([&] { run(gw1, gb1); }, 5);
    kernels::set_execution(kernels::Execution::parallel);
    const double tp = time_of([&] { run(gw2, gb2); }, 5);
    report("conv1d weight grad", ts, tp, gw1 == gw2 && gb1 == gb2);
  }

  {  // codebook search, detection-shaped
    const int t_len = 3000, d = 128, k = 128;
    const auto z = random_vec(static_cast<size_t>(t_len) * d, rng);
    const auto cb = random_vec(static_cast<size_t>(k) * d, rng);
    std::vector<int> ids1(t_len), ids2(t_len);
    auto run = [&](std::vector<int>& ids) {
      kernels::nearest_entry(z.data(), t_len, d, cb.data(), k, ids.data(), nullptr);
    };
    kernels::set_execution(kernels::Execution::serial);
    const double ts = time_of([&] { run(ids1); }, 5);
    kernels::set_execution(kernels::Execution::parallel);
    const double tp = time_of([&] { run(ids2); }, 5);
    report("nearest entry 3000x128/128", ts, tp, ids1 == ids2);
  }

  kernels::set_execution(kernels::Execution::parallel);
  return 0;
}
