#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cardforge/hashing.hpp"

namespace cardforge {

enum class TopicLevel { values, social_norms, behavioral_practices, specific_customs };
enum class TopicSource { schwartz, hofstede, curated };

std::string_view to_string(TopicLevel level);
std::string_view to_string(TopicSource source);
std::optional<TopicLevel> parse_topic_level(std::string_view s);

// Field order on disk: topic_id, level, name, description, source.
struct CulturalTopic {
  std::string topic_id;
  TopicLevel level = TopicLevel::values;
  std::string name;
  std::string description;
  TopicSource source = TopicSource::curated;

  bool operator==(const CulturalTopic&) const = default;
};

ordered_json to_json(const CulturalTopic& t);

struct TaxonomyOptions {
  // The built-in framework has 38 topics split 16/8/5/9 across the four
  // levels. Custom taxonomies may opt out of the count check.
  bool strict_count = true;
};

class Taxonomy {
 public:
  static constexpr std::size_t expected_topics = 38;
  static constexpr std::size_t expected_per_level[4] = {16, 8, 5, 9};

  /// Validates ids and descriptions, and counts when strict.
  explicit Taxonomy(std::vector<CulturalTopic> topics, TaxonomyOptions options = {});

  const std::vector<CulturalTopic>& topics() const { return topics_; }
  std::size_t size() const { return topics_.size(); }
  const CulturalTopic* find(std::string_view topic_id) const;

  /// Topics of one level in document order.
  std::vector<CulturalTopic> at_level(TopicLevel level) const;

  /// JSONL serialization, one topic per line.
  std::string to_jsonl() const;

 private:
  std::vector<CulturalTopic> topics_;
};

/// The bundled four-level framework. Level I counts the ten Schwartz basic
/// values and the six Hofstede dimensions as individual topics.
Taxonomy builtin_taxonomy();

/// Raw bundled JSONL (byte-stable).
std::string_view builtin_taxonomy_jsonl();

Taxonomy parse_taxonomy(std::string_view jsonl, TaxonomyOptions options = {});

/// "builtin" or a path to a JSONL file of topics.
Taxonomy load_taxonomy(std::string_view source, TaxonomyOptions options = {});

inline std::vector<CulturalTopic> topics_at_level(const Taxonomy& taxonomy, TopicLevel level) {
  return taxonomy.at_level(level);
}

}  // namespace cardforge
