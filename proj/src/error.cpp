#include "retina/error.hpp"

namespace retina {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::domain: return "domain";
    case ErrorKind::contract: return "contract";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

void rethrow_in_stage(const Error& e, const std::string& stage) {
  throw Error(e.kind(), stage + ": " + e.what());
}

}  // namespace retina
