// include/codemark/stats.hpp
// One-proportion Z-test over frame-level detection counts, plus an exact
// binomial tail for verification.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>

namespace codemark::stats {

// The stored beta is floored here: the z statistic's normal approximation of
// the Binomial(T, beta) null needs beta*T in the several-counts regime at
// utterance lengths around T = 300, and flooring beta only makes the test
// more conservative.
constexpr double kMinCalibratedBeta = 0.02;

// Frame-level detector operating characteristics, measured on held-out data.
struct DetectorCalibration {
  double alpha = 0.0;      // frame-level true-positive rate, in (0, 1]
  double beta = 0.0;       // frame-level false-positive rate, in (0, 1)
  double threshold = 0.5;  // score threshold the rates were measured at
  std::string source;      // dataset identifier

  bool valid() const { return alpha > 0.0 && alpha <= 1.0 && beta > 0.0 && beta < 1.0; }
};

struct DetectionVerdict {
  int count = 0;       // detected watermarked frames
  int total_frames = 0;
  double beta = 0.0;
  double z = 0.0;
  double p = 1.0;      // one-sided upper-tail p-value
  double threshold = 4.0;
  bool watermarked = false;

  std::string to_json() const;
};

// (count - beta*T) / sqrt(beta*(1-beta)*T). Throws std::invalid_argument for
// T < 1 or beta outside (0, 1).
double z_statistic(double count, int total_frames, double beta);

// alpha*m*T + beta*(1-m)*T.
double expected_count(double alpha, double beta, double watermark_ratio, int total_frames);

// One-sided upper-tail standard-normal probability, in (0, 1).
double p_value(double z);

bool utterance_decision(double z, double threshold = 4.0);

DetectionVerdict make_verdict(int count, int total_frames, double beta,
                              double threshold = 4.0);

// Exact P(X >= count) for X ~ Binomial(n, p); verification utility for the
// normal approximation used by z_statistic/p_value.
double binomial_tail(int count, int n, double p);

}  // namespace codemark::stats
