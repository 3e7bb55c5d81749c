#include "cardforge/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <thread>

#include "cardforge/fileio.hpp"
#include "cardforge/hashing.hpp"
#include "cardforge/rng.hpp"
#include "cardforge/text.hpp"

namespace cardforge {

EmbeddingVector normalize(std::vector<double> values) {
  double sq = 0.0;
  for (double v : values) sq += v * v;
  if (!(sq > 0.0) || !std::isfinite(sq)) {
    throw Error(ErrorKind::invalid_argument, "cannot normalize a zero or non-finite vector");
  }
  double inv = 1.0 / std::sqrt(sq);
  for (double& v : values) v *= inv;
  return {std::move(values), true};
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::invalid_argument, "dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                                 std::to_string(b.size()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot, -1.0, 1.0);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return cosine(a.values, b.values); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

EmbeddingVector fallback_embed(std::string_view raw, std::size_t dim) {
  if (dim < kMinFallbackDim) {
    throw Error(ErrorKind::invalid_argument, "fallback embedding dim must be at least 16");
  }
  auto cps = text::decode_utf8(text::to_lower_ascii(text::sanitize_utf8(raw)));
  if (cps.empty()) {
    throw Error(ErrorKind::invalid_argument, "cannot embed empty text: no features");
  }
  std::vector<double> buckets(dim, 0.0);
  auto add = [&](std::size_t from, std::size_t len) {
    std::u32string gram(cps.begin() + static_cast<std::ptrdiff_t>(from),
                        cps.begin() + static_cast<std::ptrdiff_t>(from + len));
    std::uint64_t h = fnv1a64(text::encode_utf8(gram));
    buckets[h % dim] += (h >> 63) ? -1.0 : 1.0;
  };
  if (cps.size() < 3) {
    add(0, cps.size());
  } else {
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) add(i, 3);
  }
  try {
    return normalize(std::move(buckets));
  } catch (const Error&) {
    throw Error(ErrorKind::invalid_argument, "text features cancel to a zero vector");
  }
}

FallbackEmbeddingProvider::FallbackEmbeddingProvider(std::size_t dim) : dim_(dim) {
  if (dim_ < kMinFallbackDim) {
    throw Error(ErrorKind::config, "fallback embedding dim must be at least 16");
  }
}

std::string FallbackEmbeddingProvider::id() const { return "fallback/trigram-fnv1a/" + std::to_string(dim_); }

std::vector<std::vector<double>> FallbackEmbeddingProvider::embed(const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(fallback_embed(t, dim_).values);
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEndpoint endpoint, std::string model, RetryPolicy retry,
                                             Sleeper sleeper, std::size_t batch_size)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      retry_(retry),
      sleeper_(std::move(sleeper)),
      batch_size_(std::max<std::size_t>(1, batch_size)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpEmbeddingProvider::id() const { return "http/" + endpoint_.base_url + "/" + model_; }

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                   texts.begin() + static_cast<std::ptrdiff_t>(std::min(texts.size(), start + batch_size_)));
    auto outcome = run_with_retry(
        retry_, sleeper_, digest_u64(canonical_dump(ordered_json(chunk))),
        [&] { return post_embeddings(endpoint_, model_, chunk); }, "embedding provider");
    for (auto& v : parse_embedding_reply(outcome.reply.text, chunk.size())) out.push_back(std::move(v));
  }
  return out;
}

EmbeddingService::EmbeddingService(std::shared_ptr<EmbeddingProvider> provider,
                                   std::optional<std::filesystem::path> cache_dir)
    : provider_(std::move(provider)), cache_dir_(std::move(cache_dir)) {
  if (cache_dir_) fileio::ensure_directory(*cache_dir_);
}

std::optional<EmbeddingVector> EmbeddingService::cached(const std::string& key) {
  {
    std::lock_guard lock(mutex_);
    auto it = memory_.find(key);
    if (it != memory_.end()) return it->second;
  }
  if (!cache_dir_) return std::nullopt;
  auto path = *cache_dir_ / (key + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(fileio::read_file(path));
    EmbeddingVector v{j.at("values").get<std::vector<double>>(), true};
    std::lock_guard lock(mutex_);
    memory_.emplace(key, v);
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void EmbeddingService::store(const std::string& key, const EmbeddingVector& v) {
  {
    std::lock_guard lock(mutex_);
    memory_[key] = v;
  }
  if (!cache_dir_) return;
  ordered_json j;
  j["key"] = key;
  j["values"] = v.values;
  fileio::write_file_atomic(*cache_dir_ / (key + ".json"), canonical_dump(j) + "\n");
}

std::vector<EmbeddingVector> EmbeddingService::embed_texts(const std::vector<std::string>& texts) {
  const std::string provider_id = provider_->id();
  std::vector<std::string> keys(texts.size());
  std::vector<std::optional<EmbeddingVector>> found(texts.size());
  std::map<std::string, std::size_t> missing;  // key -> index into `to_embed`
  std::vector<std::string> to_embed;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) {
      throw Error(ErrorKind::invalid_argument, "cannot embed empty text at position " + std::to_string(i));
    }
    keys[i] = content_hash(ordered_json::array({provider_id, texts[i]}));
    found[i] = cached(keys[i]);
    if (!found[i] && !missing.count(keys[i])) {
      missing.emplace(keys[i], to_embed.size());
      to_embed.push_back(texts[i]);
    }
  }
  if (!to_embed.empty()) {
    ++provider_calls_;
    auto raw = provider_->embed(to_embed);
    if (raw.size() != to_embed.size()) {
      throw Error(ErrorKind::provider_malformed, "embedding provider returned the wrong number of vectors");
    }
    std::vector<EmbeddingVector> fresh;
    fresh.reserve(raw.size());
    for (auto& r : raw) fresh.push_back(normalize(std::move(r)));
    for (const auto& [key, idx] : missing) store(key, fresh[idx]);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (!found[i]) found[i] = fresh[missing.at(keys[i])];
    }
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto& f : found) {
    if (!out.empty() && f->dim() != out.front().dim()) {
      throw Error(ErrorKind::provider_malformed, "embedding dimension mismatch within a batch");
    }
    out.push_back(std::move(*f));
  }
  return out;
}

namespace {

void put_f32le(std::string& buf, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32le(const std::string& buf, std::size_t off) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::vector<std::int64_t> write_embedding_sidecar(const std::filesystem::path& data_path,
                                                  const std::filesystem::path& index_path,
                                                  const std::vector<SidecarRow>& rows) {
  std::string data;
  std::vector<std::int64_t> offsets;
  ordered_json index_entries = ordered_json::object();
  std::size_t dim = rows.empty() ? 0 : rows.front().vector->dim();
  for (const auto& row : rows) {
    if (row.vector->dim() != dim) {
      throw Error(ErrorKind::invalid_argument, "sidecar rows must share one dimension");
    }
    auto offset = static_cast<std::int64_t>(data.size());
    offsets.push_back(offset);
    index_entries[row.sample_id] = offset;
    for (double v : row.vector->values) put_f32le(data, static_cast<float>(v));
  }
  ordered_json index;
  index["dtype"] = "float32le";
  index["dim"] = dim;
  index["count"] = rows.size();
  index["data_file"] = data_path.filename().string();
  index["offsets"] = index_entries;
  fileio::write_file_atomic(data_path, data);
  fileio::write_file_atomic(index_path, index.dump(2) + "\n");
  return offsets;
}

std::map<std::string, EmbeddingVector> read_embedding_sidecar(const std::filesystem::path& data_path,
                                                              const std::filesystem::path& index_path) {
  auto index = nlohmann::json::parse(fileio::read_file(index_path), nullptr, false);
  if (index.is_discarded() || !index.contains("dim") || !index.contains("offsets")) {
    throw Error(ErrorKind::schema, index_path.string() + ": invalid embedding index");
  }
  std::string data = fileio::read_file(data_path);
  auto dim = index["dim"].get<std::size_t>();
  std::map<std::string, EmbeddingVector> out;
  for (auto it = index["offsets"].begin(); it != index["offsets"].end(); ++it) {
    auto off = it.value().get<std::size_t>();
    if (off + 4 * dim > data.size()) {
      throw Error(ErrorKind::schema, index_path.string() + ": offset past end of data file");
    }
    std::vector<double> values(dim);
    for (std::size_t k = 0; k < dim; ++k) values[k] = get_f32le(data, off + 4 * k);
    out.emplace(it.key(), EmbeddingVector{std::move(values), false});
  }
  return out;
}

}  // namespace cardforge
