#ifndef FANET_ERROR_HPP
#define FANET_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fanet {

enum class ErrorKind {
  InvalidInput,     // rejected input / params / corpus
  Format,           // malformed file or record
  ModelNotReady,    // untrained or unloaded model
  State,            // stale or mismatched intermediate state
  UndefinedMetric,  // metric not defined for the given data
  Dependency,       // missing upstream artifact
  Numerical,        // divergence or training failure
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::Format: return "format error";
    case ErrorKind::ModelNotReady: return "model not ready";
    case ErrorKind::State: return "invalid state";
    case ErrorKind::UndefinedMetric: return "undefined metric";
    case ErrorKind::Dependency: return "missing dependency";
    case ErrorKind::Numerical: return "numerical failure";
  }
  return "error";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace fanet

#endif  // FANET_ERROR_HPP
