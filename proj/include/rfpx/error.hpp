#pragma once

#include <stdexcept>
#include <string>

namespace rfpx {

/// Base class for every error raised by the library. Stage tags are
/// prepended as errors propagate out of a pipeline (e.g. "[encoders] ...").
class Error : public std::exception {
 public:
  explicit Error(std::string message) : message_(std::move(message)) {}

  const char* what() const noexcept override { return message_.c_str(); }

  void add_stage(const std::string& stage) { message_ = "[" + stage + "] " + message_; }

  /// True for errors caused by bad user input (configuration, arguments,
  /// contract violations); the CLI maps these to exit code 1.
  virtual bool is_validation() const { return false; }

 private:
  std::string message_;
};

#define RFPX_DEFINE_ERROR(Name, Validation)                     \
  class Name : public Error {                                   \
   public:                                                      \
    using Error::Error;                                         \
    bool is_validation() const override { return Validation; }  \
  };

RFPX_DEFINE_ERROR(DimensionError, false)
RFPX_DEFINE_ERROR(NumericInputError, false)
RFPX_DEFINE_ERROR(ContractError, true)
RFPX_DEFINE_ERROR(DeterminismError, false)
RFPX_DEFINE_ERROR(DegenerateRangeError, false)
RFPX_DEFINE_ERROR(EmptyInstructionError, true)
RFPX_DEFINE_ERROR(DivergedTrainingError, false)
RFPX_DEFINE_ERROR(TaskError, false)
RFPX_DEFINE_ERROR(BankError, false)
RFPX_DEFINE_ERROR(ConfigError, true)
RFPX_DEFINE_ERROR(RangeError, true)
RFPX_DEFINE_ERROR(CorruptionError, false)
RFPX_DEFINE_ERROR(CompatibilityError, false)
RFPX_DEFINE_ERROR(IoError, false)

#undef RFPX_DEFINE_ERROR

}  // namespace rfpx
