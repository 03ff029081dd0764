// src/stats.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/stats.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace codemark::stats {

double z_statistic(double count, int total_frames, double beta) {
  if (total_frames < 1) throw std::invalid_argument("total_frames must be >= 1");
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("beta must lie strictly inside (0, 1)");
  const double t = static_cast<double>(total_frames);
  return (count - beta * t) / std::sqrt(beta * (1.0 - beta) * t);
}

double expected_count(double alpha, double beta, double watermark_ratio, int total_frames) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in [0, 1)");
  if (!(watermark_ratio >= 0.0 && watermark_ratio <= 0.5))
    throw std::invalid_argument("watermark ratio must lie in [0, 0.5]");
  const double t = static_cast<double>(total_frames);
  return alpha * watermark_ratio * t + beta * (1.0 - watermark_ratio) * t;
}

double p_value(double z) {
  if (!std::isfinite(z)) throw std::invalid_argument("z must be finite");
  double p = 0.5 * std::erfc(z / std::sqrt(2.0));
  // clamp into the open interval (0, 1)
  const double tiny = 1e-300;
  if (p < tiny) p = tiny;
  if (p > 1.0 - 1e-16) p = 1.0 - 1e-16;
  return p;
}

bool utterance_decision(double z, double threshold) { return z > threshold; }

DetectionVerdict make_verdict(int count, int total_frames, double beta, double threshold) {
  DetectionVerdict v;
  v.count = count;
  v.total_frames = total_frames;
  v.beta = beta;
  v.z = z_statistic(count, total_frames, beta);
  v.p = p_value(v.z);
  v.threshold = threshold;
  v.watermarked = utterance_decision(v.z, threshold);
  return v;
}

std::string DetectionVerdict::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\"count\":" << count << ",\"frames\":" << total_frames << ",\"beta\":" << beta
     << ",\"z\":" << z << ",\"p\":" << p << ",\"threshold\":" << threshold
     << ",\"watermarked\":" << (watermarked ? "true" : "false") << "}";
  return os.str();
}

double binomial_tail(int count, int n, double p) {
  if (n < 1 || !(p > 0.0 && p < 1.0)) throw std::invalid_argument("invalid binomial parameters");
  if (count <= 0) return 1.0;
  if (count > n) return 0.0;
  const double logp = std::log(p), logq = std::log1p(-p);
  double tail = 0.0;
  for (int k = count; k <= n; ++k) {
    const double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    tail += std::exp(logc + k * logp + (n - k) * logq);
  }
  return std::min(1.0, tail);
}

}  // namespace codemark::stats
