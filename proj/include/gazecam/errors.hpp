#pragma once

#include <stdexcept>
#include <string>

namespace gazecam {

// Failure categories; the CLI maps config/input/format to exit code 1 and
// io/state/internal to exit code 2.
enum class ErrorKind { config, input, format, io, state, internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  const char* kind_name() const {
    switch (kind_) {
      case ErrorKind::config: return "config";
      case ErrorKind::input: return "input";
      case ErrorKind::format: return "format";
      case ErrorKind::io: return "io";
      case ErrorKind::state: return "state";
      case ErrorKind::internal: return "internal";
    }
    return "unknown";
  }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& m) { return Error(ErrorKind::config, m); }
inline Error input_error(const std::string& m) { return Error(ErrorKind::input, m); }
inline Error format_error(const std::string& m) { return Error(ErrorKind::format, m); }
inline Error io_error(const std::string& m) { return Error(ErrorKind::io, m); }
inline Error state_error(const std::string& m) { return Error(ErrorKind::state, m); }
inline Error internal_error(const std::string& m) { return Error(ErrorKind::internal, m); }

}  // namespace gazecam
