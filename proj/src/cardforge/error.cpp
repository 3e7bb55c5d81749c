#include "cardforge/error.hpp"

namespace cardforge {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::provider_exhausted: return "provider_exhausted";
    case ErrorKind::provider_auth: return "provider_auth";
    case ErrorKind::provider_malformed: return "provider_malformed";
    case ErrorKind::schema: return "schema";
    case ErrorKind::io: return "io";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

bool is_provider_error(ErrorKind kind) {
  return kind == ErrorKind::provider_exhausted || kind == ErrorKind::provider_auth ||
         kind == ErrorKind::provider_malformed;
}

}  // namespace cardforge
