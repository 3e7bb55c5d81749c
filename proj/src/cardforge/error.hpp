#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cardforge {

enum class ErrorKind {
  config,
  provider_exhausted,
  provider_auth,
  provider_malformed,
  schema,
  io,
  invalid_argument,
  precondition,
  internal,
};

std::string_view to_string(ErrorKind kind);

bool is_provider_error(ErrorKind kind);

// Every failure raised by the library carries a kind so the C layer can map it
// onto a status code. `field` names the offending field when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string field = {})
      : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

}  // namespace cardforge
