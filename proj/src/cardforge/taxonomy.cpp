#include "cardforge/taxonomy.hpp"

#include <set>

#include "cardforge/fileio.hpp"
#include "cardforge/json_fields.hpp"
#include "cardforge/resources.hpp"
#include "cardforge/text.hpp"

namespace cardforge {

std::string_view to_string(TopicLevel level) {
  switch (level) {
    case TopicLevel::values: return "values";
    case TopicLevel::social_norms: return "social_norms";
    case TopicLevel::behavioral_practices: return "behavioral_practices";
    case TopicLevel::specific_customs: return "specific_customs";
  }
  return "values";
}

std::string_view to_string(TopicSource source) {
  switch (source) {
    case TopicSource::schwartz: return "schwartz";
    case TopicSource::hofstede: return "hofstede";
    case TopicSource::curated: return "curated";
  }
  return "curated";
}

std::optional<TopicLevel> parse_topic_level(std::string_view s) {
  for (auto l : {TopicLevel::values, TopicLevel::social_norms, TopicLevel::behavioral_practices,
                 TopicLevel::specific_customs}) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

namespace {

std::optional<TopicSource> parse_topic_source(std::string_view s) {
  for (auto src : {TopicSource::schwartz, TopicSource::hofstede, TopicSource::curated}) {
    if (to_string(src) == s) return src;
  }
  return std::nullopt;
}

CulturalTopic topic_from_json(const nlohmann::json& j) {
  using fields::get_string;
  using fields::invariant;
  CulturalTopic t;
  t.topic_id = get_string(j, "topic_id");
  auto level = parse_topic_level(get_string(j, "level"));
  invariant(level.has_value(), "level", "unknown topic level");
  t.level = *level;
  t.name = get_string(j, "name");
  t.description = fields::get_optional_string(j, "description").value_or("");
  auto source = parse_topic_source(get_string(j, "source"));
  invariant(source.has_value(), "source", "source must be schwartz, hofstede or curated");
  t.source = *source;
  invariant(!t.topic_id.empty(), "topic_id", "topic_id must be non-empty");
  invariant(!t.name.empty(), "name", "topic name must be non-empty");
  return t;
}

}  // namespace

ordered_json to_json(const CulturalTopic& t) {
  ordered_json j;
  j["topic_id"] = t.topic_id;
  j["level"] = to_string(t.level);
  j["name"] = t.name;
  j["description"] = t.description;
  j["source"] = to_string(t.source);
  return j;
}

Taxonomy::Taxonomy(std::vector<CulturalTopic> topics, TaxonomyOptions options) : topics_(std::move(topics)) {
  std::set<std::string> seen;
  std::size_t per_level[4] = {0, 0, 0, 0};
  for (const auto& t : topics_) {
    if (!seen.insert(t.topic_id).second) {
      throw FieldError(ValidationErrorKind::invariant_violation, "topic_id", "duplicate topic_id " + t.topic_id);
    }
    if (t.level != TopicLevel::values && text::trim(t.description).empty()) {
      throw FieldError(ValidationErrorKind::invariant_violation, "description",
                       "topic " + t.topic_id + " needs a description");
    }
    ++per_level[static_cast<int>(t.level)];
  }
  if (topics_.empty()) {
    throw FieldError(ValidationErrorKind::invariant_violation, "topics", "taxonomy has no topics");
  }
  if (options.strict_count) {
    if (topics_.size() != expected_topics) {
      throw FieldError(ValidationErrorKind::invariant_violation, "topics",
                       "taxonomy must contain " + std::to_string(expected_topics) + " topics, found " +
                           std::to_string(topics_.size()) + " (use --no-strict-count for custom taxonomies)");
    }
    for (int l = 0; l < 4; ++l) {
      if (per_level[l] != expected_per_level[l]) {
        throw FieldError(ValidationErrorKind::invariant_violation, "level",
                         "level " + std::string(to_string(static_cast<TopicLevel>(l))) + " must have " +
                             std::to_string(expected_per_level[l]) + " topics, found " +
                             std::to_string(per_level[l]));
      }
    }
  }
}

const CulturalTopic* Taxonomy::find(std::string_view topic_id) const {
  for (const auto& t : topics_) {
    if (t.topic_id == topic_id) return &t;
  }
  return nullptr;
}

std::vector<CulturalTopic> Taxonomy::at_level(TopicLevel level) const {
  std::vector<CulturalTopic> out;
  for (const auto& t : topics_) {
    if (t.level == level) out.push_back(t);
  }
  return out;
}

std::string Taxonomy::to_jsonl() const {
  std::string out;
  for (const auto& t : topics_) {
    out += canonical_dump(to_json(t));
    out += '\n';
  }
  return out;
}

std::string_view builtin_taxonomy_jsonl() { return resources::get("data/taxonomy.jsonl"); }

Taxonomy parse_taxonomy(std::string_view jsonl, TaxonomyOptions options) {
  std::vector<CulturalTopic> topics;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      topics.push_back(topic_from_json(fields::parse_object(line)));
    } catch (const FieldError& e) {
      throw FieldError(e.validation_kind(), e.field(), "taxonomy line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Taxonomy(std::move(topics), options);
}

Taxonomy builtin_taxonomy() { return parse_taxonomy(builtin_taxonomy_jsonl(), {}); }

Taxonomy load_taxonomy(std::string_view source, TaxonomyOptions options) {
  if (source.empty() || source == "builtin") return builtin_taxonomy();
  return parse_taxonomy(fileio::read_file(std::string(source)), options);
}

}  // namespace cardforge
