#pragma once

#include <stdexcept>
#include <string>

namespace retina {

enum class ErrorKind {
  io,          // file missing or unreadable
  format,      // undecodable or unsupported file contents
  domain,      // input value outside the operation's domain
  contract,    // caller violated a precondition (shape mismatch, bad parameter)
  degenerate,  // input carries no usable structure (empty mask, zero variance)
  numerical,   // a non-finite value was produced
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Re-raise `e` with the same kind and `stage` prepended to the message.
[[noreturn]] void rethrow_in_stage(const Error& e, const std::string& stage);

}  // namespace retina
