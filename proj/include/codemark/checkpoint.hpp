// include/codemark/checkpoint.hpp
// Checkpoint container: a JSON config block followed by named f64 tensors.
// Layout (little-endian):
//   8 bytes magic "CMKCKPT1"
//   u64 json_length, JSON bytes (model + stft config, flags, calibration)
//   u64 tensor_count
//   per tensor: u32 name_length, name, u32 rows, u32 cols, f64 data
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <memory>
#include <string>

#include "codemark/codec.hpp"

namespace codemark::checkpoint {

constexpr int kFormatVersion = 1;

void save(const codec::Models& models, const std::string& path);

// Throws MissingPrerequisiteError when the file is absent or malformed.
std::unique_ptr<codec::Models> load(const std::string& path);

}  // namespace codemark::checkpoint
