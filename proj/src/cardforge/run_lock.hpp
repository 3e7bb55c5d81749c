#pragma once

#include <filesystem>

namespace cardforge {

// Exclusive ownership of a run directory for the lifetime of the object. The
// lock file records the owner's pid; a lock left behind by a dead process is
// taken over.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();

  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  bool held_ = false;
};

}  // namespace cardforge
