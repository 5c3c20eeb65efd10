#pragma once

#include <stdexcept>
#include <string>

namespace coadapt {

enum class ErrorCode {
  kConfig,
  kUnknownEnvironment,
  kInvalidParams,
  kZeroLikelihood,
  kBeliefExplosion,
  kTooLarge,
  kEmptyHistory,
  kTooFewDemos,
  kEmptyCluster,
  kRoleSwapUnsupported,
  kBadCondition,
  kNotFound,
  kIo,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above. `field`
// names the offending config field or parameter when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

}  // namespace coadapt
