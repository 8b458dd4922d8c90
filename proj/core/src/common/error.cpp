#include <cavg/common/error.hpp>

namespace cavg {

std::string_view to_string(ErrorCode code) noexcept {
	switch (code) {
		case ErrorCode::InvalidSpec: return "InvalidSpec";
		case ErrorCode::CapacityExceeded: return "CapacityExceeded";
		case ErrorCode::DegenerateGap: return "DegenerateGap";
		case ErrorCode::UnknownVehicle: return "UnknownVehicle";
		case ErrorCode::NoAgents: return "NoAgents";
		case ErrorCode::ShapeMismatch: return "ShapeMismatch";
		case ErrorCode::EmptyNeighborSet: return "EmptyNeighborSet";
		case ErrorCode::NonFiniteValue: return "NonFiniteValue";
		case ErrorCode::DisconnectedParameter: return "DisconnectedParameter";
		case ErrorCode::NanGradient: return "NanGradient";
		case ErrorCode::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
		case ErrorCode::ParseError: return "ParseError";
		case ErrorCode::ValidationError: return "ValidationError";
		case ErrorCode::IoError: return "IoError";
		case ErrorCode::UsageError: return "UsageError";
	}
	return "Unknown";
}

} // namespace cavg
