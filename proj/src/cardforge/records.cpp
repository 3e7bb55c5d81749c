#include "cardforge/records.hpp"

#include <cmath>

#include "cardforge/fileio.hpp"

namespace cardforge {

std::string_view to_string(ValidationErrorKind kind) {
  switch (kind) {
    case ValidationErrorKind::malformed_syntax: return "malformed_syntax";
    case ValidationErrorKind::missing_field: return "missing_field";
    case ValidationErrorKind::wrong_type: return "wrong_type";
    case ValidationErrorKind::invariant_violation: return "invariant_violation";
  }
  return "invariant_violation";
}

namespace fields {

json parse_object(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FieldError(ValidationErrorKind::malformed_syntax, "", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw FieldError(ValidationErrorKind::malformed_syntax, "", "record is not a JSON object");
  }
  return j;
}

bool present(const json& obj, const char* name) {
  auto it = obj.find(name);
  return it != obj.end() && !it->is_null();
}

const json& require(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) {
    throw FieldError(ValidationErrorKind::missing_field, name, std::string("missing field '") + name + "'");
  }
  return *it;
}

namespace {
[[noreturn]] void wrong_type(const char* name, const char* expected) {
  throw FieldError(ValidationErrorKind::wrong_type, name,
                   std::string("field '") + name + "' must be " + expected);
}
}  // namespace

std::string get_string(const json& obj, const char* name) {
  const json& v = require(obj, name);
  if (!v.is_string()) wrong_type(name, "a string");
  return v.get<std::string>();
}

std::int64_t get_int(const json& obj, const char* name) {
  const json& v = require(obj, name);
  if (!v.is_number_integer()) wrong_type(name, "an integer");
  return v.get<std::int64_t>();
}

double get_number(const json& obj, const char* name) {
  const json& v = require(obj, name);
  if (!v.is_number()) wrong_type(name, "a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) wrong_type(name, "a finite number");
  return d;
}

bool get_bool(const json& obj, const char* name) {
  const json& v = require(obj, name);
  if (!v.is_boolean()) wrong_type(name, "a boolean");
  return v.get<bool>();
}

std::vector<std::string> get_string_array(const json& obj, const char* name) {
  const json& v = require(obj, name);
  if (!v.is_array()) wrong_type(name, "an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) wrong_type(name, "an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::optional<std::string> get_optional_string(const json& obj, const char* name) {
  if (!present(obj, name)) return std::nullopt;
  return get_string(obj, name);
}

std::optional<std::int64_t> get_optional_int(const json& obj, const char* name) {
  if (!present(obj, name)) return std::nullopt;
  return get_int(obj, name);
}

std::optional<double> get_optional_number(const json& obj, const char* name) {
  if (!present(obj, name)) return std::nullopt;
  return get_number(obj, name);
}

}  // namespace fields

std::vector<Culture> default_roster() {
  return {{"GB", "United Kingdom"}, {"CN", "China"}, {"KR", "South Korea"}, {"IN", "India"}, {"SG", "Singapore"}};
}

std::string known_culture_name(std::string_view code) {
  static const std::map<std::string_view, std::string_view> names{
      {"GB", "United Kingdom"}, {"CN", "China"},     {"KR", "South Korea"}, {"IN", "India"},
      {"SG", "Singapore"},      {"US", "United States"}, {"JP", "Japan"},   {"DE", "Germany"},
      {"FR", "France"},         {"BR", "Brazil"},    {"MX", "Mexico"},      {"NG", "Nigeria"},
      {"EG", "Egypt"},          {"RU", "Russia"},    {"ID", "Indonesia"},   {"TR", "Turkey"},
  };
  auto it = names.find(code);
  return it == names.end() ? std::string(code) : std::string(it->second);
}

std::string_view to_string(QuestionType t) {
  switch (t) {
    case QuestionType::scenario: return "scenario";
    case QuestionType::value_oriented: return "value_oriented";
    case QuestionType::open_ended: return "open_ended";
  }
  return "scenario";
}

std::string_view to_string(QuestionStage s) { return s == QuestionStage::universal ? "universal" : "adapted"; }

std::string_view to_string(ResponseStage s) { return s == ResponseStage::isolated ? "isolated" : "contrastive"; }

std::optional<QuestionType> parse_question_type(std::string_view s) {
  if (s == "scenario") return QuestionType::scenario;
  if (s == "value_oriented") return QuestionType::value_oriented;
  if (s == "open_ended") return QuestionType::open_ended;
  return std::nullopt;
}

namespace {

ordered_json optional_value(const std::optional<std::string>& v) { return v ? ordered_json(*v) : ordered_json(); }

template <class T>
ordered_json optional_value(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json();
}

}  // namespace

QuestionRecord QuestionRecord::make_universal(std::string topic_id, QuestionType qtype, std::string text) {
  QuestionRecord q;
  q.topic_id = std::move(topic_id);
  q.qtype = qtype;
  q.text = std::move(text);
  q.stage = QuestionStage::universal;
  q.id = q.expected_id();
  return q;
}

QuestionRecord QuestionRecord::make_adapted(const QuestionRecord& parent, std::string culture, std::string text) {
  QuestionRecord q;
  q.topic_id = parent.topic_id;
  q.qtype = parent.qtype;
  q.text = std::move(text);
  q.stage = QuestionStage::adapted;
  q.adapted_for = std::move(culture);
  q.parent_id = parent.id;
  q.id = q.expected_id();
  return q;
}

std::string QuestionRecord::expected_id() const {
  return content_hash(ordered_json::array(
      {topic_id, std::string(to_string(qtype)), text, std::string(to_string(stage)), optional_value(adapted_for)}));
}

std::string ScoredSample::make_id(std::string_view question_id, std::string_view culture,
                                  std::string_view response_text) {
  return content_hash(ordered_json::array({"sample", question_id, culture, response_text}));
}

ordered_json to_json(const Culture& c) {
  ordered_json j;
  j["code"] = c.code;
  j["display_name"] = c.display_name;
  return j;
}

ordered_json to_json(const QuestionRecord& q) {
  ordered_json j;
  j["id"] = q.id;
  j["topic_id"] = q.topic_id;
  j["qtype"] = to_string(q.qtype);
  j["text"] = q.text;
  j["stage"] = to_string(q.stage);
  j["adapted_for"] = optional_value(q.adapted_for);
  j["parent_id"] = optional_value(q.parent_id);
  return j;
}

ordered_json to_json(const ResponseRecord& r) {
  ordered_json j;
  j["question_id"] = r.question_id;
  j["culture"] = r.culture;
  j["text"] = r.text;
  j["stage"] = to_string(r.stage);
  j["peer_cultures"] = r.peer_cultures;
  return j;
}

ordered_json to_json(const ScoredSample& s) {
  ordered_json j;
  j["sample_id"] = s.sample_id;
  j["question_id"] = s.question_id;
  j["culture"] = s.culture;
  j["question_text"] = s.question_text;
  j["response_text"] = s.response_text;
  j["embedding_ref"] = optional_value(s.embedding_ref);
  j["cluster_id"] = optional_value(s.cluster_id);
  j["r"] = optional_value(s.r);
  j["d"] = optional_value(s.d);
  j["s"] = optional_value(s.s);
  return j;
}

ordered_json to_json(const RunManifest& m) {
  ordered_json j;
  j["tool_version"] = m.tool_version;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  ordered_json stages = ordered_json::object();
  for (const auto& [name, out] : m.stage_outputs) {
    ordered_json e;
    e["path"] = out.path;
    e["records"] = out.records;
    e["sha256"] = out.sha256;
    e["fingerprint"] = out.fingerprint;
    stages[name] = e;
  }
  j["stage_outputs"] = stages;
  return j;
}

using fields::get_optional_string;
using fields::get_string;
using fields::invariant;

Culture culture_from_json(const nlohmann::json& j) {
  Culture c{get_string(j, "code"), get_string(j, "display_name")};
  invariant(!c.code.empty(), "code", "culture code must be non-empty");
  return c;
}

QuestionRecord question_from_json(const nlohmann::json& j) {
  QuestionRecord q;
  q.id = get_string(j, "id");
  q.topic_id = get_string(j, "topic_id");
  auto qtype = parse_question_type(get_string(j, "qtype"));
  invariant(qtype.has_value(), "qtype", "qtype must be scenario, value_oriented or open_ended");
  q.qtype = *qtype;
  q.text = get_string(j, "text");
  std::string stage = get_string(j, "stage");
  invariant(stage == "universal" || stage == "adapted", "stage", "stage must be universal or adapted");
  q.stage = stage == "universal" ? QuestionStage::universal : QuestionStage::adapted;
  q.adapted_for = get_optional_string(j, "adapted_for");
  q.parent_id = get_optional_string(j, "parent_id");

  invariant(!q.topic_id.empty(), "topic_id", "topic_id must be non-empty");
  invariant(!q.text.empty(), "text", "question text must be non-empty");
  const bool adapted = q.stage == QuestionStage::adapted;
  invariant(adapted == q.adapted_for.has_value(), "adapted_for",
            adapted ? "adapted question requires adapted_for" : "universal question must not set adapted_for");
  invariant(adapted == q.parent_id.has_value(), "parent_id",
            adapted ? "adapted question requires parent_id" : "universal question must not set parent_id");
  invariant(q.id == q.expected_id(), "id", "id does not match the content hash of the record");
  return q;
}

ResponseRecord response_from_json(const nlohmann::json& j) {
  ResponseRecord r;
  r.question_id = get_string(j, "question_id");
  r.culture = get_string(j, "culture");
  r.text = get_string(j, "text");
  std::string stage = get_string(j, "stage");
  invariant(stage == "isolated" || stage == "contrastive", "stage", "stage must be isolated or contrastive");
  r.stage = stage == "isolated" ? ResponseStage::isolated : ResponseStage::contrastive;
  r.peer_cultures = fields::get_string_array(j, "peer_cultures");

  invariant(!r.question_id.empty(), "question_id", "question_id must be non-empty");
  invariant(!r.culture.empty(), "culture", "culture must be non-empty");
  invariant(!r.text.empty(), "text", "response text must be non-empty");
  if (r.stage == ResponseStage::isolated) {
    invariant(r.peer_cultures.empty(), "peer_cultures", "isolated response must have no peer cultures");
  } else {
    invariant(!r.peer_cultures.empty(), "peer_cultures", "contrastive response requires peer cultures");
    for (const auto& p : r.peer_cultures) {
      invariant(p != r.culture, "peer_cultures", "peer cultures must exclude the response culture");
    }
  }
  return r;
}

ScoredSample scored_sample_from_json(const nlohmann::json& j) {
  ScoredSample s;
  s.sample_id = get_string(j, "sample_id");
  s.question_id = get_string(j, "question_id");
  s.culture = get_string(j, "culture");
  s.question_text = get_string(j, "question_text");
  s.response_text = get_string(j, "response_text");
  s.embedding_ref = fields::get_optional_int(j, "embedding_ref");
  s.cluster_id = fields::get_optional_int(j, "cluster_id");
  s.r = fields::get_optional_number(j, "r");
  s.d = fields::get_optional_number(j, "d");
  s.s = fields::get_optional_number(j, "s");

  invariant(s.sample_id == ScoredSample::make_id(s.question_id, s.culture, s.response_text), "sample_id",
            "sample_id does not match the content hash of the sample");
  if (s.r) invariant(*s.r >= 0.0, "r", "r must be non-negative");
  if (s.d) invariant(*s.d >= 0.0 && *s.d <= 2.0, "d", "d must lie in [0, 2]");
  if (s.s) {
    invariant(s.r.has_value() && s.d.has_value(), "s", "s requires both r and d");
    invariant(*s.s == *s.r * *s.d, "s", "s must equal r * d");
  }
  return s;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.tool_version = get_string(j, "tool_version");
  m.config_hash = get_string(j, "config_hash");
  const auto& seed = fields::require(j, "seed");
  invariant(seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<std::int64_t>() >= 0), "seed",
            "seed must be a non-negative integer");
  m.seed = seed.get<std::uint64_t>();
  const auto& stages = fields::require(j, "stage_outputs");
  invariant(stages.is_object(), "stage_outputs", "stage_outputs must be an object");
  for (auto it = stages.begin(); it != stages.end(); ++it) {
    StageOutput out;
    out.path = get_string(*it, "path");
    out.records = static_cast<std::uint64_t>(fields::get_int(*it, "records"));
    out.sha256 = get_string(*it, "sha256");
    out.fingerprint = get_optional_string(*it, "fingerprint").value_or("");
    m.stage_outputs[it.key()] = out;
  }
  return m;
}

std::optional<RecordKind> parse_record_kind(std::string_view s) {
  if (s == "question") return RecordKind::question;
  if (s == "response") return RecordKind::response;
  if (s == "scored_sample") return RecordKind::scored_sample;
  if (s == "manifest") return RecordKind::manifest;
  return std::nullopt;
}

Validated<QuestionRecord> validate_question(std::string_view line) {
  return fields::validate_with<QuestionRecord>(line, question_from_json);
}

Validated<ResponseRecord> validate_response(std::string_view line) {
  return fields::validate_with<ResponseRecord>(line, response_from_json);
}

Validated<ScoredSample> validate_scored_sample(std::string_view line) {
  return fields::validate_with<ScoredSample>(line, scored_sample_from_json);
}

ValidationReport validate_record(std::string_view line, RecordKind kind) {
  auto wrap = [](const auto& v) { return ValidationReport{v.ok(), v.error}; };
  switch (kind) {
    case RecordKind::question: return wrap(validate_question(line));
    case RecordKind::response: return wrap(validate_response(line));
    case RecordKind::scored_sample: return wrap(validate_scored_sample(line));
    case RecordKind::manifest:
      return wrap(fields::validate_with<RunManifest>(line, manifest_from_json));
  }
  return {};
}

namespace {

template <class T, class Decode>
std::vector<T> read_records(const std::string& path, Decode decode) {
  std::vector<T> out;
  std::size_t line_no = 0;
  for (const auto& line : fileio::read_jsonl_lines(path)) {
    ++line_no;
    try {
      out.push_back(decode(fields::parse_object(line)));
    } catch (const FieldError& e) {
      throw FieldError(e.validation_kind(), e.field(),
                       path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<QuestionRecord> read_questions(const std::string& path) {
  return read_records<QuestionRecord>(path, question_from_json);
}

std::vector<ResponseRecord> read_responses(const std::string& path) {
  return read_records<ResponseRecord>(path, response_from_json);
}

std::vector<ScoredSample> read_scored_samples(const std::string& path) {
  return read_records<ScoredSample>(path, scored_sample_from_json);
}

}  // namespace cardforge
