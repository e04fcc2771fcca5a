#pragma once

#include <stdexcept>
#include <string>

namespace lorot {

enum class ErrorCode {
    DimensionMismatch,
    NotCausallyRelated,
    NotChronological,
    NullOrSpacelikeVelocity,
    FlowDomainExceeded,
    NoTimelikeSolution,
    PartialMap,
    AnchorNotInSupport,
    MonotonicityViolated,
    NonFiniteNeighborhood,
    NonIntegrablePotential,
    RegionLeavesDomain,
    UnsupportedModel,
    InvalidArgument,
    IoError,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch:       return "DimensionMismatch";
        case ErrorCode::NotCausallyRelated:      return "NotCausallyRelated";
        case ErrorCode::NotChronological:        return "NotChronological";
        case ErrorCode::NullOrSpacelikeVelocity: return "NullOrSpacelikeVelocity";
        case ErrorCode::FlowDomainExceeded:      return "FlowDomainExceeded";
        case ErrorCode::NoTimelikeSolution:      return "NoTimelikeSolution";
        case ErrorCode::PartialMap:              return "PartialMap";
        case ErrorCode::AnchorNotInSupport:      return "AnchorNotInSupport";
        case ErrorCode::MonotonicityViolated:    return "MonotonicityViolated";
        case ErrorCode::NonFiniteNeighborhood:   return "NonFiniteNeighborhood";
        case ErrorCode::NonIntegrablePotential:  return "NonIntegrablePotential";
        case ErrorCode::RegionLeavesDomain:      return "RegionLeavesDomain";
        case ErrorCode::UnsupportedModel:        return "UnsupportedModel";
        case ErrorCode::InvalidArgument:         return "InvalidArgument";
        case ErrorCode::IoError:                 return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace lorot
