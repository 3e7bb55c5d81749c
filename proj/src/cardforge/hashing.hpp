#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

namespace cardforge {

using ordered_json = nlohmann::ordered_json;

/// Lowercase hex SHA-256 of raw bytes.
std::string sha256_hex(std::string_view bytes);

/// Compact, key-order-preserving serialization used for hashing. Invalid
/// UTF-8 is rejected.
std::string canonical_dump(const ordered_json& value);

/// Digest of the canonical serialization of `fields`; used for record ids,
/// request keys and cache keys.
std::string content_hash(const ordered_json& fields);

/// SHA-256 of a file's bytes, or an io error.
std::string sha256_file(const std::string& path);

/// First 8 bytes of the digest of `text` as an integer; stable seed derivation.
std::uint64_t digest_u64(std::string_view text);

}  // namespace cardforge
