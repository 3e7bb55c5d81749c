#include "cardforge/prompts.hpp"

#include "cardforge/error.hpp"
#include "cardforge/fileio.hpp"
#include "cardforge/hashing.hpp"
#include "cardforge/resources.hpp"
#include "cardforge/text.hpp"

namespace cardforge {

std::string render_template(std::string_view tmpl, const TemplateVars& vars) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t pos = 0;
  while (true) {
    auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw Error(ErrorKind::config, "unterminated placeholder in prompt template");
    }
    out.append(tmpl.substr(pos, open - pos));
    std::string name = text::trim(tmpl.substr(open + 2, close - open - 2));
    auto it = vars.find(name);
    if (it == vars.end()) {
      throw Error(ErrorKind::config, "prompt template references unknown placeholder {{" + name + "}}");
    }
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

namespace {

std::string strip_final_newline(std::string_view s) {
  if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

PromptSet PromptSet::bundled() {
  PromptSet set;
  constexpr std::string_view prefix = "prompts/";
  constexpr std::string_view suffix = ".txt";
  for (const auto& [path, content] : resources::all()) {
    if (path.substr(0, prefix.size()) != prefix) continue;
    std::string_view name = path.substr(prefix.size());
    if (name.size() > suffix.size() && name.substr(name.size() - suffix.size()) == suffix) {
      name.remove_suffix(suffix.size());
    }
    set.templates_[std::string(name)] = strip_final_newline(content);
  }
  return set;
}

PromptSet PromptSet::with_overrides(const std::filesystem::path& dir) {
  PromptSet set = bundled();
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorKind::config, "prompts directory not found: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (name.size() > 4 && name.substr(name.size() - 4) == ".txt") name.resize(name.size() - 4);
    set.templates_[name] = strip_final_newline(fileio::read_file(entry.path()));
  }
  return set;
}

const std::string& PromptSet::raw(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw Error(ErrorKind::config, "missing prompt template " + std::string(name));
  }
  return it->second;
}

std::string PromptSet::render(std::string_view name, const TemplateVars& vars) const {
  return render_template(raw(name), vars);
}

std::string PromptSet::digest() const {
  ordered_json j = ordered_json::object();
  for (const auto& [name, body] : templates_) j[name] = body;
  return content_hash(j);
}

std::string PromptSet::version() const {
  auto it = templates_.find("VERSION");
  return it == templates_.end() ? std::string("unversioned") : text::trim(it->second);
}

}  // namespace cardforge
