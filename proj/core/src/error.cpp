// SPDX-License-Identifier: Apache-2.0
#include "gestura/error.hpp"

namespace gestura {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::BadLandmarkCount: return "BadLandmarkCount";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::UnknownLandmarkName: return "UnknownLandmarkName";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::LeftHandUnsupported: return "LeftHandUnsupported";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::StateSpaceMismatch: return "StateSpaceMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::AmbiguousLabelPresent: return "AmbiguousLabelPresent";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::UnknownContext: return "UnknownContext";
    case ErrorCode::BadPath: return "BadPath";
    case ErrorCode::UnknownCalculator: return "UnknownCalculator";
    case ErrorCode::CalculatorFailure: return "CalculatorFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::FixtureExhausted: return "FixtureExhausted";
    case ErrorCode::MissingPromptSection: return "MissingPromptSection";
    case ErrorCode::UnboundTemplateVariable: return "UnboundTemplateVariable";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace gestura
