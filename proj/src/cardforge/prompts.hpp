#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace cardforge {

using TemplateVars = std::map<std::string, std::string>;

/// Replaces every `{{name}}` with vars[name]. An unknown placeholder is a
/// config error; unused variables are ignored.
std::string render_template(std::string_view tmpl, const TemplateVars& vars);

// Named prompt templates ("questions.user", "adapt.system", ...). The bundled
// set mirrors the repository's prompts/ directory; a user directory overrides
// individual files.
class PromptSet {
 public:
  static PromptSet bundled();
  static PromptSet with_overrides(const std::filesystem::path& dir);

  const std::string& raw(std::string_view name) const;
  std::string render(std::string_view name, const TemplateVars& vars) const;

  /// Digest over every template; changes whenever any prompt text changes.
  std::string digest() const;
  std::string version() const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace cardforge
