#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cardforge/hashing.hpp"
#include "cardforge/json_fields.hpp"

namespace cardforge {

struct Culture {
  std::string code;
  std::string display_name;

  bool operator==(const Culture&) const = default;
};

/// GB, CN, KR, IN, SG.
std::vector<Culture> default_roster();

/// Display name for a known two-letter code, otherwise the code itself.
std::string known_culture_name(std::string_view code);

enum class QuestionType { scenario, value_oriented, open_ended };
enum class QuestionStage { universal, adapted };
enum class ResponseStage { isolated, contrastive };

std::string_view to_string(QuestionType t);
std::string_view to_string(QuestionStage s);
std::string_view to_string(ResponseStage s);
std::optional<QuestionType> parse_question_type(std::string_view s);

// Serialized field order: id, topic_id, qtype, text, stage, adapted_for,
// parent_id. The id is the content hash of
// [topic_id, qtype, text, stage, adapted_for].
struct QuestionRecord {
  std::string id;
  std::string topic_id;
  QuestionType qtype = QuestionType::scenario;
  std::string text;
  QuestionStage stage = QuestionStage::universal;
  std::optional<std::string> adapted_for;
  std::optional<std::string> parent_id;

  static QuestionRecord make_universal(std::string topic_id, QuestionType qtype, std::string text);
  static QuestionRecord make_adapted(const QuestionRecord& parent, std::string culture, std::string text);

  std::string expected_id() const;
  bool operator==(const QuestionRecord&) const = default;
};

// Field order: question_id, culture, text, stage, peer_cultures.
struct ResponseRecord {
  std::string question_id;
  std::string culture;
  std::string text;
  ResponseStage stage = ResponseStage::isolated;
  std::vector<std::string> peer_cultures;

  bool operator==(const ResponseRecord&) const = default;
};

// Field order: sample_id, question_id, culture, question_text, response_text,
// embedding_ref, cluster_id, r, d, s. Scores are null for samples that are
// not cluster centres.
struct ScoredSample {
  std::string sample_id;
  std::string question_id;
  std::string culture;
  std::string question_text;
  std::string response_text;
  std::optional<std::int64_t> embedding_ref;
  std::optional<std::int64_t> cluster_id;
  std::optional<double> r;
  std::optional<double> d;
  std::optional<double> s;

  static std::string make_id(std::string_view question_id, std::string_view culture,
                             std::string_view response_text);
  bool operator==(const ScoredSample&) const = default;
};

struct StageOutput {
  std::string path;  // relative to the run directory
  std::uint64_t records = 0;
  std::string sha256;
  std::string fingerprint;  // digest of the inputs that produced the file

  bool operator==(const StageOutput&) const = default;
};

struct RunManifest {
  std::string tool_version;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, StageOutput> stage_outputs;

  bool operator==(const RunManifest&) const = default;
};

ordered_json to_json(const Culture& c);
ordered_json to_json(const QuestionRecord& q);
ordered_json to_json(const ResponseRecord& r);
ordered_json to_json(const ScoredSample& s);
ordered_json to_json(const RunManifest& m);

Culture culture_from_json(const nlohmann::json& j);
QuestionRecord question_from_json(const nlohmann::json& j);
ResponseRecord response_from_json(const nlohmann::json& j);
ScoredSample scored_sample_from_json(const nlohmann::json& j);
RunManifest manifest_from_json(const nlohmann::json& j);

/// Canonical single-line serialization (no trailing newline).
template <class T>
std::string to_jsonl_line(const T& record) {
  return canonical_dump(to_json(record));
}

enum class RecordKind { question, response, scored_sample, manifest };

std::optional<RecordKind> parse_record_kind(std::string_view s);

struct ValidationReport {
  bool ok = false;
  std::optional<ValidationError> error;
};

Validated<QuestionRecord> validate_question(std::string_view line);
Validated<ResponseRecord> validate_response(std::string_view line);
Validated<ScoredSample> validate_scored_sample(std::string_view line);

ValidationReport validate_record(std::string_view line, RecordKind kind);

/// Reads a JSONL file of records; throws a schema Error naming the file,
/// line and first violated field.
std::vector<QuestionRecord> read_questions(const std::string& path);
std::vector<ResponseRecord> read_responses(const std::string& path);
std::vector<ScoredSample> read_scored_samples(const std::string& path);

template <class T>
std::vector<std::string> to_jsonl_lines(const std::vector<T>& records) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(to_jsonl_line(r));
  return lines;
}

}  // namespace cardforge
