#include "daband/error.hpp"

namespace daband {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidNumeric: return "InvalidNumeric";
    case ErrorKind::SingularUpdate: return "SingularUpdate";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::DimensionError: return "DimensionError";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::ArmIndexError: return "ArmIndexError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::CorruptRecord: return "CorruptRecord";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::NumericOverflow: return "NumericOverflow";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::StreamExhausted: return "StreamExhausted";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::PoolError: return "PoolError";
    case ErrorKind::GroundTruthUnavailable: return "GroundTruthUnavailable";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::FirewallViolation: return "FirewallViolation";
  }
  return "Unknown";
}

}  // namespace daband
