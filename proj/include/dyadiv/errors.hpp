#pragma once

#include <stdexcept>
#include <string>

namespace dyadiv {

// Error taxonomy shared by the C++ core, the C API and the CLI exit codes.
enum class ErrorKind {
  Usage,          // bad configuration or flag values
  Io,             // file not found / unreadable / unwritable
  Parse,          // malformed CSV cell or row
  Domain,         // value outside its admissible set (e.g. non-binary z/d)
  Schema,         // header or column-count mismatch
  Precondition,   // operation called on data that lacks a required field
  Convergence,    // iterative solver failed to reach tolerance
  Separation,     // logistic likelihood unbounded (perfect separation)
  Singular,       // rank-deficient or singular linear system
  WeakIv,         // instrument too weak for stable weighting
  Inference,      // bootstrap failure ceiling exceeded
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::Separation: return "separation";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::WeakIv: return "weak_iv";
    case ErrorKind::Inference: return "inference";
  }
  return "unknown";
}

}  // namespace dyadiv
