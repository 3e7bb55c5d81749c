#include "cardforge/fileio.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <sstream>

#include "cardforge/error.hpp"
#include "cardforge/resources.hpp"
#include "cardforge/text.hpp"

namespace cardforge::fileio {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::io, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorKind::io, "cannot write " + tmp.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      throw Error(ErrorKind::io, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::io, "cannot rename into " + path.string());
  }
}

std::vector<std::string> read_jsonl_lines(const fs::path& path) {
  std::string content = read_file(path);
  if (content.rfind("\xEF\xBB\xBF", 0) == 0) {
    throw Error(ErrorKind::schema, path.string() + ": JSONL files must not start with a BOM");
  }
  std::vector<std::string> lines;
  for (auto& line : text::split_lines(content)) {
    if (!text::trim(line).empty()) lines.push_back(std::move(line));
  }
  return lines;
}

std::string jsonl_content(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());
  }
}

}  // namespace cardforge::fileio

namespace cardforge::resources {

std::string_view get(std::string_view name) {
  const auto& table = all();
  auto it = table.find(name);
  if (it == table.end()) {
    throw Error(ErrorKind::io, "no bundled resource named " + std::string(name));
  }
  return it->second;
}

}  // namespace cardforge::resources
