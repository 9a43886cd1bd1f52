#include "trapcc/error.hpp"

namespace trapcc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NoObservations: return "NoObservations";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::BothHalvesEmpty: return "BothHalvesEmpty";
    case ErrorCode::NoForwardCache: return "NoForwardCache";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::CheckpointLoad: return "CheckpointLoad";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Format: return "Format";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace trapcc
