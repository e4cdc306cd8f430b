#pragma once

#include <stdexcept>
#include <string>

namespace pep {

enum class ErrorKind {
  Schema,
  Format,
  Size,
  Shape,
  Index,
  Input,
  Contract,
  Numeric,
  UndefinedMetric,
  Overwrite,
};

// Single exception type for the library; `kind()` carries the category that
// the CLI maps onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Size: return "size error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Index: return "index error";
    case ErrorKind::Input: return "input error";
    case ErrorKind::Contract: return "contract error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::UndefinedMetric: return "undefined metric";
    case ErrorKind::Overwrite: return "would overwrite";
  }
  return "error";
}

}  // namespace pep
