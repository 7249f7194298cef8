/******************************************************************************
 * Copyright 2026 The CanICA Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace canica {

enum class ErrorCode {
	EmptyMatrix,
	BadMagic,
	ShapeOverflow,
	TruncatedPayload,
	NonFiniteValue,
	BadDimension,
	NumericalFailure,
	DegenerateInput,
	EmptyGroup,
	EmptyNoise,
	NotWhitened,
	SingularMatrix,
	TooFewSubjects,
	DuplicateSubject,
	Io,
	Config,
};

inline std::string_view to_string(ErrorCode code)
{
	switch (code) {
	case ErrorCode::EmptyMatrix: return "EmptyMatrix";
	case ErrorCode::BadMagic: return "BadMagic";
	case ErrorCode::ShapeOverflow: return "ShapeOverflow";
	case ErrorCode::TruncatedPayload: return "TruncatedPayload";
	case ErrorCode::NonFiniteValue: return "NonFiniteValue";
	case ErrorCode::BadDimension: return "BadDimension";
	case ErrorCode::NumericalFailure: return "NumericalFailure";
	case ErrorCode::DegenerateInput: return "DegenerateInput";
	case ErrorCode::EmptyGroup: return "EmptyGroup";
	case ErrorCode::EmptyNoise: return "EmptyNoise";
	case ErrorCode::NotWhitened: return "NotWhitened";
	case ErrorCode::SingularMatrix: return "SingularMatrix";
	case ErrorCode::TooFewSubjects: return "TooFewSubjects";
	case ErrorCode::DuplicateSubject: return "DuplicateSubject";
	case ErrorCode::Io: return "Io";
	case ErrorCode::Config: return "Config";
	}
	return "Unknown";
}

/// Process exit status: 1 configuration, 2 data, 3 numerical.
inline int exit_code(ErrorCode code)
{
	switch (code) {
	case ErrorCode::Config: return 1;
	case ErrorCode::NumericalFailure:
	case ErrorCode::SingularMatrix: return 3;
	default: return 2;
	}
}

/// Exception carrying a machine-readable code and, once it has crossed a
/// pipeline boundary, the name of the stage that raised it.
class Error : public std::runtime_error {
public:
	Error(ErrorCode code, const std::string& message)
		: std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
	{
	}

	ErrorCode code() const noexcept { return code_; }
	const std::string& stage() const noexcept { return stage_; }

	Error with_stage(std::string stage) const
	{
		Error tagged(code_, stage + ": " + what(), 0);
		tagged.stage_ = std::move(stage);
		return tagged;
	}

private:
	Error(ErrorCode code, const std::string& full, int) : std::runtime_error(full), code_(code) {}

	ErrorCode code_;
	std::string stage_;
};

} // namespace canica
