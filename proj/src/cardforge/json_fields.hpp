#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cardforge/error.hpp"
#include "json.hpp"

namespace cardforge {

enum class ValidationErrorKind { malformed_syntax, missing_field, wrong_type, invariant_violation };

std::string_view to_string(ValidationErrorKind kind);

struct ValidationError {
  ValidationErrorKind kind;
  std::string field;
  std::string message;
};

// Schema error raised while decoding a record. Decoders stop at the first
// problem, so the field is always the first violated one.
class FieldError : public Error {
 public:
  FieldError(ValidationErrorKind kind, std::string field, const std::string& message)
      : Error(ErrorKind::schema, message, field), validation_kind_(kind) {}

  ValidationErrorKind validation_kind() const noexcept { return validation_kind_; }
  ValidationError report() const { return {validation_kind_, field(), what()}; }

 private:
  ValidationErrorKind validation_kind_;
};

/// A decoded record, or the report naming why it was rejected.
template <class T>
struct Validated {
  std::optional<T> record;
  std::optional<ValidationError> error;

  bool ok() const { return record.has_value(); }
};

namespace fields {

using json = nlohmann::json;

/// Parses one JSONL line into an object; malformed_syntax otherwise.
json parse_object(std::string_view line);

const json& require(const json& obj, const char* name);
bool present(const json& obj, const char* name);

std::string get_string(const json& obj, const char* name);
std::int64_t get_int(const json& obj, const char* name);
double get_number(const json& obj, const char* name);
bool get_bool(const json& obj, const char* name);
std::vector<std::string> get_string_array(const json& obj, const char* name);

// Absent and null both decode to nullopt.
std::optional<std::string> get_optional_string(const json& obj, const char* name);
std::optional<std::int64_t> get_optional_int(const json& obj, const char* name);
std::optional<double> get_optional_number(const json& obj, const char* name);

inline void invariant(bool condition, const char* name, const std::string& message) {
  if (!condition) throw FieldError(ValidationErrorKind::invariant_violation, name, message);
}

/// Runs `decode` on the parsed line and converts a FieldError into a report.
template <class T, class Decode>
Validated<T> validate_with(std::string_view line, Decode decode) {
  Validated<T> out;
  try {
    out.record = decode(parse_object(line));
  } catch (const FieldError& e) {
    out.error = e.report();
  }
  return out;
}

}  // namespace fields

}  // namespace cardforge
