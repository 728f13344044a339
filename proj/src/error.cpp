#include "mecsim/error.hpp"

namespace mecsim {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateGeometry: return "degenerate-geometry";
    case ErrorCode::kDegenerateChannel: return "degenerate-channel";
    case ErrorCode::kNoAssociation: return "no-association";
    case ErrorCode::kInvalidNode: return "invalid-node";
    case ErrorCode::kInvalidTask: return "invalid-task";
    case ErrorCode::kNoResources: return "no-resources";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kAction: return "action";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kBatch: return "batch";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kCheckpoint: return "checkpoint";
    case ErrorCode::kInstanceTooLarge: return "instance-too-large";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace mecsim
