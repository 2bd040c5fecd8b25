// Copyright 2026 The wvalab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wvalab/error.hpp"

namespace wvalab {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::OrthogonalSelection: return "OrthogonalSelection";
        case ErrorCode::NotOrthogonal: return "NotOrthogonal";
        case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
        case ErrorCode::NullVector: return "NullVector";
        case ErrorCode::InvalidState: return "InvalidState";
        case ErrorCode::InsufficientSpan: return "InsufficientSpan";
        case ErrorCode::TruncationTooTight: return "TruncationTooTight";
        case ErrorCode::IncompatibleMeter: return "IncompatibleMeter";
        case ErrorCode::EmptyPostselection: return "EmptyPostselection";
        case ErrorCode::StepTooLarge: return "StepTooLarge";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::UnsupportedCombination: return "UnsupportedCombination";
        case ErrorCode::ResolutionTooCoarse: return "ResolutionTooCoarse";
        case ErrorCode::SingularCovariance: return "SingularCovariance";
        case ErrorCode::ValidityViolation: return "ValidityViolation";
        case ErrorCode::FlatLikelihood: return "FlatLikelihood";
        case ErrorCode::BoundaryMaximum: return "BoundaryMaximum";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string &what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {
}

void fail(ErrorCode code, const std::string &what) {
    throw Error(code, what);
}

}  // namespace wvalab
