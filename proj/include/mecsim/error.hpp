#ifndef MECSIM_ERROR_HPP_
#define MECSIM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace mecsim {

enum class ErrorCode {
  kDegenerateGeometry,
  kDegenerateChannel,
  kNoAssociation,
  kInvalidNode,
  kInvalidTask,
  kNoResources,
  kConfig,
  kAction,
  kShape,
  kBatch,
  kNumeric,
  kCheckpoint,
  kInstanceTooLarge,
  kIo,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mecsim

#endif  // MECSIM_ERROR_HPP_
