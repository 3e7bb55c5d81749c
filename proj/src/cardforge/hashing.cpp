#include "cardforge/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "cardforge/error.hpp"

namespace cardforge {

namespace {

struct DigestContext {
  DigestContext() : ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
      throw Error(ErrorKind::internal, "cannot initialise SHA-256");
    }
  }

  void update(const void* data, std::size_t size) {
    if (EVP_DigestUpdate(ctx.get(), data, size) != 1) {
      throw Error(ErrorKind::internal, "SHA-256 update failed");
    }
  }

  std::array<unsigned char, 32> finish() {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != out.size()) {
      throw Error(ErrorKind::internal, "SHA-256 finalisation failed");
    }
    return out;
  }

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx;
};

std::string to_hex(const std::array<unsigned char, 32>& bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(64);
  for (unsigned char b : bytes) {
    hex.push_back(digits[b >> 4]);
    hex.push_back(digits[b & 0x0f]);
  }
  return hex;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  DigestContext ctx;
  ctx.update(bytes.data(), bytes.size());
  return to_hex(ctx.finish());
}

std::string canonical_dump(const ordered_json& value) {
  try {
    return value.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
  } catch (const nlohmann::json::type_error& e) {
    throw Error(ErrorKind::invalid_argument, std::string("cannot serialise value: ") + e.what());
  }
}

std::string content_hash(const ordered_json& fields) { return sha256_hex(canonical_dump(fields)); }

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::io, "cannot open " + path);
  }
  DigestContext ctx;
  std::array<char, 1 << 16> buffer{};
  while (in) {
    in.read(buffer.data(), buffer.size());
    ctx.update(buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  return to_hex(ctx.finish());
}

std::uint64_t digest_u64(std::string_view text) {
  DigestContext ctx;
  ctx.update(text.data(), text.size());
  auto bytes = ctx.finish();
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  }
  return v;
}

}  // namespace cardforge
