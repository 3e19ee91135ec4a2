#include "wattgov/errors.hpp"

namespace wattgov {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::NonMonotonicTime: return "NonMonotonicTime";
    case Errc::EmptyTrace: return "EmptyTrace";
    case Errc::RangeOutsideTrace: return "RangeOutsideTrace";
    case Errc::TraceTooShort: return "TraceTooShort";
    case Errc::NoSuchFile: return "NoSuchFile";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::ConfigTooLarge: return "ConfigTooLarge";
    case Errc::WindowTooSmall: return "WindowTooSmall";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::StaleCache: return "StaleCache";
    case Errc::SteppedAfterDone: return "SteppedAfterDone";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::BufferNotFull: return "BufferNotFull";
    case Errc::SinkError: return "SinkError";
  }
  return "UnknownError";
}

int errc_exit_class(Errc code) {
  switch (code) {
    case Errc::MalformedRow:
    case Errc::NonMonotonicTime:
    case Errc::EmptyTrace:
    case Errc::RangeOutsideTrace:
    case Errc::TraceTooShort:
    case Errc::WindowTooSmall:
    case Errc::NoSuchFile:
    case Errc::ChecksumMismatch:
      return 2;
    case Errc::ConfigInvalid:
    case Errc::ConfigTooLarge:
      return 1;
    default:
      return 3;
  }
}

}  // namespace wattgov
