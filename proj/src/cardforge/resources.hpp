#pragma once

#include <map>
#include <string>
#include <string_view>

namespace cardforge::resources {

/// Files compiled into the library, keyed by repository-relative path
/// (e.g. "data/taxonomy.jsonl", "prompts/adapt.user.txt").
const std::map<std::string_view, std::string_view>& all();

/// Throws Error(io) when the resource does not exist.
std::string_view get(std::string_view name);

}  // namespace cardforge::resources
