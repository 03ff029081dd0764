// tests/gradcheck.hpp
// Central finite-difference oracle for the autodiff path. Test-only; stays
// independent of the tape internals it checks.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "codemark/nn.hpp"
#include "codemark/rng.hpp"
#include "codemark/tensor.hpp"

namespace gradcheck {

struct Result {
  double max_rel = 0.0;
  int checked = 0;
  bool ok(double tol = 1e-3) const { return checked > 0 && max_rel <= tol; }
};

inline double rel_error(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  const double mag = std::max(std::abs(analytic), std::abs(numeric));
  if (diff <= 1e-9) return 0.0;  // both effectively zero
  return diff / std::max(mag, 1e-6);
}

// loss(): rebuilds the graph from current parameter values and returns the
//         scalar loss (no gradient side effects required).
// grads(): zeroes grads, runs forward+backward, leaves gradients in
//          Parameter::grad, returns the loss.
inline Result check_params(const std::vector<codemark::nn::Parameter*>& params,
                           const std::function<double()>& loss,
                           const std::function<double()>& grads, int coords_per_param,
                           codemark::Rng& rng) {
  Result result;
  grads();
  for (auto* p : params) {
    const int n = static_cast<int>(p->value.data.size());
    for (int c = 0; c < coords_per_param; ++c) {
      const int i = static_cast<int>(rng.uniform_int(n));
      const double keep = p->value.data[i];
      const double h = 1e-5 * std::max(1.0, std::abs(keep));
      p->value.data[i] = keep + h;
      const double up = loss();
      p->value.data[i] = keep - h;
      const double down = loss();
      p->value.data[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      result.max_rel = std::max(result.max_rel, rel_error(p->grad.data[i], fd));
      ++result.checked;
    }
  }
  return result;
}

// Same oracle for a gradient with respect to an input tensor.
inline Result check_input(codemark::Tensor& input, const codemark::Tensor& analytic_grad,
                          const std::function<double()>& loss, int coords,
                          codemark::Rng& rng) {
  Result result;
  const int n = static_cast<int>(input.data.size());
  for (int c = 0; c < coords; ++c) {
    const int i = static_cast<int>(rng.uniform_int(n));
    const double keep = input.data[i];
    const double h = 1e-5 * std::max(1.0, std::abs(keep));
    input.data[i] = keep + h;
    const double up = loss();
    input.data[i] = keep - h;
    const double down = loss();
    input.data[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    result.max_rel = std::max(result.max_rel, rel_error(analytic_grad.data[i], fd));
    ++result.checked;
  }
  return result;
}

}  // namespace gradcheck
