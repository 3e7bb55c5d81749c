#include "cardforge/run_lock.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <string>

#include "cardforge/error.hpp"
#include "cardforge/fileio.hpp"

namespace cardforge {

namespace {

bool try_create(const std::filesystem::path& path) {
  int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) return false;
    throw Error(ErrorKind::io, "cannot create lock file " + path.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
  return true;
}

bool owner_alive(const std::filesystem::path& path) {
  std::ifstream in(path);
  long pid = 0;
  if (!(in >> pid) || pid <= 0) return false;
  if (pid == ::getpid()) return true;
  return ::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM;
}

}  // namespace

RunLock::RunLock(const std::filesystem::path& run_dir) : path_(run_dir / ".cardforge.lock") {
  fileio::ensure_directory(run_dir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (try_create(path_)) {
      held_ = true;
      return;
    }
    if (owner_alive(path_)) break;
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  throw Error(ErrorKind::precondition,
              "run directory " + run_dir.string() + " is locked by another process (" + path_.string() + ")");
}

RunLock::~RunLock() {
  if (!held_) return;
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

}  // namespace cardforge
