// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gestura {

enum class ErrorCode {
  MalformedInput,
  BadLandmarkCount,
  NonMonotonicTimestamps,
  UnknownLandmarkName,
  InvalidArgument,
  LeftHandUnsupported,
  EmptyStream,
  StateSpaceMismatch,
  EmptyDataset,
  EmptyGrid,
  AmbiguousLabelPresent,
  DuplicateName,
  UnknownContext,
  BadPath,
  UnknownCalculator,
  CalculatorFailure,
  ParseError,
  TransportError,
  AuthError,
  RateLimited,
  FixtureExhausted,
  MissingPromptSection,
  UnboundTemplateVariable,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gestura
