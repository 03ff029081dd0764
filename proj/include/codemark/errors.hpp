// include/codemark/errors.hpp
// Error taxonomy shared by the library and the CLI exit-code table.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <stdexcept>
#include <string>

namespace codemark {

// Payload does not fit in the available watermark frames. CLI exit code 3.
struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Required model/checkpoint/config is missing. CLI exit code 2.
struct MissingPrerequisiteError : std::runtime_error {
  explicit MissingPrerequisiteError(const std::string& msg) : std::runtime_error(msg) {}
};

// External codec (MP3) is not installed on this host. CLI exit code 4.
struct CodecUnavailableError : std::runtime_error {
  explicit CodecUnavailableError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace codemark
