#include "cardforge/mock_provider.hpp"

#include <array>
#include <charconv>

#include "cardforge/hashing.hpp"
#include "cardforge/text.hpp"

namespace cardforge {

namespace {

constexpr std::array<std::string_view, 96> kCommonWords = {
    "family",    "community", "respect",    "tradition",  "friends",    "work",       "school",     "elders",
    "festival",  "home",      "money",      "food",       "neighbours", "duty",       "choice",     "freedom",
    "harmony",   "honesty",   "privacy",    "success",    "effort",     "children",   "parents",    "marriage",
    "religion",  "holiday",   "manners",    "greeting",   "gift",       "meal",       "savings",    "career",
    "teacher",   "exam",      "public",     "private",    "group",      "individual", "leader",     "team",
    "trust",     "loyalty",   "fairness",   "law",        "nature",     "city",       "village",    "travel",
    "clothing",  "music",     "sport",      "weekend",    "morning",    "evening",    "guest",      "host",
    "ceremony",  "wedding",   "funeral",    "birthday",   "history",    "future",     "change",     "stability",
    "security",  "ambition",  "modesty",    "humour",     "patience",   "time",       "punctuality","hierarchy",
    "equality",  "gender",    "role",       "decision",   "advice",     "support",    "care",       "health",
    "language",  "politeness","formality",  "silence",    "conflict",   "agreement",  "belief",     "value",
    "custom",    "norm",      "behaviour",  "identity",   "belonging",  "pride",      "shame",      "balance",
};

constexpr std::array<std::string_view, 64> kFlavourWords = {
    "tea",        "queue",      "pub",        "weather",    "understatement", "rice",       "dumplings", "lantern",
    "ancestors",  "filial",     "kimchi",     "hanbok",     "chuseok",   "seniority",  "curry",      "diwali",
    "joint",      "temple",     "hawker",     "kiasu",      "multiracial", "efficiency", "banter",   "privacy",
    "saving",     "guanxi",     "face",       "mooncake",   "soju",      "jeong",      "nunchi",     "cricket",
    "monsoon",    "chai",       "namaste",    "dowry",      "mandarin",  "malay",      "tamil",      "hdb",
    "pragmatism", "merit",      "council",    "harvest",    "calligraphy", "karaoke",  "kimjang",   "holi",
    "pongal",     "chopsticks", "bowing",     "handshake",  "sunday",    "roast",      "dim",        "sum",
    "hotpot",     "bibimbap",   "masala",     "laksa",      "satay",     "scones",     "tiffin",     "pasar",
};

constexpr std::array<std::string_view, 8> kQuestionOpeners = {
    "How would you respond when",
    "What do you think about",
    "How important is it that",
    "In your view, why does",
    "How do people around you handle",
    "What would you do if",
    "How should one balance",
    "Why might someone value",
};

// Deterministic byte stream: SHA-256 over (seed, block counter).
class ByteStream {
 public:
  explicit ByteStream(std::string seed) : seed_(std::move(seed)) {}

  unsigned next() {
    if (pos_ >= block_.size()) {
      block_ = sha256_hex(seed_ + "#" + std::to_string(counter_++));
      pos_ = 0;
    }
    unsigned v = 0;
    std::from_chars(block_.data() + pos_, block_.data() + pos_ + 2, v, 16);
    pos_ += 2;
    return v;
  }

  unsigned next16() { return (next() << 8) | next(); }

 private:
  std::string seed_;
  std::string block_;
  std::size_t pos_ = 0;
  unsigned counter_ = 0;
};

std::string words(ByteStream& bytes, std::size_t count, std::string_view culture) {
  // A culture draws part of its vocabulary from a fixed slice of the flavour
  // list, so different cultures get distinguishable word distributions.
  std::size_t offset = culture.empty() ? 0 : (digest_u64(culture) % kFlavourWords.size());
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out += ' ';
    unsigned pick = bytes.next16();
    if (!culture.empty() && pick % 5 < 2) {
      out += kFlavourWords[(offset + (pick >> 3) % 10) % kFlavourWords.size()];
    } else {
      out += kCommonWords[(pick >> 3) % kCommonWords.size()];
    }
  }
  return out;
}

int param_int(const StageTag& tag, const std::string& name, int fallback) {
  auto it = tag.params.find(name);
  if (it == tag.params.end()) return fallback;
  int v = fallback;
  auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  return ec == std::errc() ? v : fallback;
}

std::string param(const StageTag& tag, const std::string& name) {
  auto it = tag.params.find(name);
  return it == tag.params.end() ? std::string() : it->second;
}

std::string mock_questions(const StageTag& tag, ByteStream& bytes) {
  static constexpr std::array<std::string_view, 3> kTypes = {"scenario", "value_oriented", "open_ended"};
  int k = std::max(1, param_int(tag, "k", 1));
  std::string out;
  for (int i = 1; i <= k; ++i) {
    std::string_view opener = kQuestionOpeners[bytes.next() % kQuestionOpeners.size()];
    out += std::to_string(i) + ". [" + std::string(kTypes[static_cast<std::size_t>(i - 1) % 3]) + "] " +
           std::string(opener) + " " + words(bytes, 7, {}) + "?\n";
  }
  return out;
}

std::string mock_response(const StageTag& tag, ByteStream& bytes) {
  std::string culture = param(tag, "culture");
  std::size_t n = 24 + bytes.next() % 12;
  return "RESPONSE:\n" + words(bytes, n, culture) + ".";
}

std::string mock_adapt(const StageTag& tag, ByteStream& bytes) {
  std::string culture = param(tag, "culture");
  std::string out = "CHARACTERISTICS:\n";
  for (const auto& code : text::split(param(tag, "cultures"), ',')) {
    if (code.empty()) continue;
    out += "- " + code + ": emphasises " + words(bytes, 4, code) + "\n";
  }
  out += "REASONING:\nThe answers differ mainly in " + words(bytes, 6, {}) + ".\n";
  out += "FINAL QUESTION: For people in " + culture + ", how do " + words(bytes, 6, culture) + " shape everyday choices?\n";
  return out;
}

}  // namespace

std::optional<StageTag> find_stage_tag(std::string_view prompt) {
  auto start = prompt.find("[[cf:");
  if (start == std::string_view::npos) return std::nullopt;
  auto end = prompt.find("]]", start);
  if (end == std::string_view::npos) return std::nullopt;
  auto body = prompt.substr(start + 5, end - start - 5);
  StageTag tag;
  bool first = true;
  for (const auto& part : text::split(body, ' ')) {
    if (part.empty()) continue;
    if (first) {
      tag.stage = part;
      first = false;
      continue;
    }
    auto eq = part.find('=');
    if (eq == std::string::npos) {
      tag.params[part] = "";
    } else {
      tag.params[part.substr(0, eq)] = part.substr(eq + 1);
    }
  }
  return tag;
}

int mock_judge_score(std::string_view response_sha) {
  unsigned byte = 0;
  if (response_sha.size() >= 2) std::from_chars(response_sha.data(), response_sha.data() + 2, byte, 16);
  return 1 + static_cast<int>(byte % 5);
}

std::string mock_complete(const CompletionRequest& request) {
  const std::string key = request.key();
  auto tag = find_stage_tag(request.user_prompt);
  if (!tag) tag = find_stage_tag(request.system_prompt);
  if (!tag) return "ECHO: " + key.substr(0, 16);

  ByteStream bytes(std::string(kMockGrammarVersion) + ":" + key);
  const std::string& stage = tag->stage;
  if (stage == "questions") return mock_questions(*tag, bytes);
  if (stage == "response" || stage == "contrastive" || stage == "open_answer") return mock_response(*tag, bytes);
  if (stage == "adapt") return mock_adapt(*tag, bytes);
  if (stage == "probe") {
    int n = std::max(1, param_int(*tag, "n", 4));
    return std::string("ANSWER: ") + static_cast<char>('A' + bytes.next() % static_cast<unsigned>(n));
  }
  if (stage == "binary") return bytes.next() % 2 ? "ANSWER: true" : "ANSWER: false";
  if (stage == "options") {
    int n = std::max(1, param_int(*tag, "n", 2));
    std::string out = "SCORES:";
    for (int i = 0; i < n; ++i) out += " " + std::to_string(1 + bytes.next() % 5);
    return out;
  }
  if (stage == "judge") return "SCORE: " + std::to_string(mock_judge_score(param(*tag, "response_sha")));
  return "ECHO: " + key.substr(0, 16);
}

}  // namespace cardforge
