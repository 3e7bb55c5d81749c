#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cardforge/gateway.hpp"
#include "cardforge/http_provider.hpp"

namespace cardforge {

struct EmbeddingVector {
  std::vector<double> values;
  bool normalized = false;

  std::size_t dim() const { return values.size(); }
};

/// Scales to unit L2 norm; throws invalid_argument on a zero vector.
EmbeddingVector normalize(std::vector<double> values);

/// Dot product of unit vectors clamped to [-1, 1]. Throws on dimension mismatch.
double cosine(std::span<const double> a, std::span<const double> b);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

inline constexpr std::size_t kDefaultEmbeddingDim = 256;
inline constexpr std::size_t kMinFallbackDim = 16;

/// Offline embedding. The text is ASCII-lowercased and split into
/// code-point trigrams (a text shorter than three code points is one
/// feature). Each feature's UTF-8 bytes are hashed with 64-bit FNV-1a: bucket
/// = hash mod dim, sign = -1 when the top bit is set, else +1. Bucket counts
/// are L2-normalized.
EmbeddingVector fallback_embed(std::string_view text, std::size_t dim = kDefaultEmbeddingDim);

/// 64-bit FNV-1a, exposed for tests of the hashing scheme.
std::uint64_t fnv1a64(std::string_view bytes);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// Identifies provider, model and dimension; part of the cache key.
  virtual std::string id() const = 0;
  /// Raw vectors (not necessarily normalized), one per text, same order.
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

class FallbackEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit FallbackEmbeddingProvider(std::size_t dim = kDefaultEmbeddingDim);
  std::string id() const override;
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  std::size_t dim_;
};

class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(HttpEndpoint endpoint, std::string model, RetryPolicy retry, Sleeper sleeper = {},
                        std::size_t batch_size = 64);
  std::string id() const override;
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  HttpEndpoint endpoint_;
  std::string model_;
  RetryPolicy retry_;
  Sleeper sleeper_;
  std::size_t batch_size_;
};

// Normalizing, caching front end used by the selection and analysis stages.
class EmbeddingService {
 public:
  EmbeddingService(std::shared_ptr<EmbeddingProvider> provider,
                   std::optional<std::filesystem::path> cache_dir = std::nullopt);

  /// One unit vector per text, same order. Identical texts map to
  /// bitwise-identical vectors. Throws on empty text or mixed dimensions.
  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts);

  std::uint64_t provider_calls() const { return provider_calls_; }

 private:
  std::optional<EmbeddingVector> cached(const std::string& key);
  void store(const std::string& key, const EmbeddingVector& v);

  std::shared_ptr<EmbeddingProvider> provider_;
  std::optional<std::filesystem::path> cache_dir_;
  std::mutex mutex_;
  std::unordered_map<std::string, EmbeddingVector> memory_;
  std::uint64_t provider_calls_ = 0;
};

// Sidecar layout: `<name>.f32` holds rows of little-endian float32; the JSON
// index maps sample_id to the byte offset of its row.
struct SidecarRow {
  std::string sample_id;
  const EmbeddingVector* vector = nullptr;
};

/// Writes both files atomically and returns the byte offset of each row.
std::vector<std::int64_t> write_embedding_sidecar(const std::filesystem::path& data_path,
                                                  const std::filesystem::path& index_path,
                                                  const std::vector<SidecarRow>& rows);

std::map<std::string, EmbeddingVector> read_embedding_sidecar(const std::filesystem::path& data_path,
                                                              const std::filesystem::path& index_path);

}  // namespace cardforge
