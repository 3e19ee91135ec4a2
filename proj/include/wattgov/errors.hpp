#pragma once

#include <stdexcept>
#include <string>

namespace wattgov {

// Every failure the library can raise, by name. The name is part of the
// CLI contract: it is printed verbatim on stderr and maps to an exit class.
enum class Errc {
  // data errors (exit class 2)
  MalformedRow,
  NonMonotonicTime,
  EmptyTrace,
  RangeOutsideTrace,
  TraceTooShort,
  WindowTooSmall,
  NoSuchFile,
  ChecksumMismatch,
  // usage / config errors (exit class 1)
  ConfigInvalid,
  ConfigTooLarge,
  // internal contract violations (exit class 3)
  ShapeMismatch,
  StaleCache,
  SteppedAfterDone,
  EmptySequence,
  LengthMismatch,
  BufferNotFull,
  SinkError,
};

const char* errc_name(Errc code);

// Exit classes: 0 success, 1 usage/config, 2 data, 3 internal.
int errc_exit_class(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }
  const char* name() const { return errc_name(code_); }
  int exit_class() const { return errc_exit_class(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace wattgov
