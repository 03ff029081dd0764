// include/codemark/tensor.hpp
// Dense row-major 2-D tensor of doubles.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace codemark {

struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

  static Tensor zeros(int r, int c) { return Tensor(r, c, 0.0); }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    assert(same_shape(o));
    for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
  Tensor& operator*=(double c) {
    for (double& v : data) v *= c;
    return *this;
  }
};

}  // namespace codemark
