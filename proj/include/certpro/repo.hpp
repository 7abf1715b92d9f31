#pragma once

#include <filesystem>
#include <string>

namespace certpro {

namespace fs = std::filesystem;

// On-disk repository layout:
//   objects/<2-hex>/<62-hex>       raw object bytes
//   meta/<digest>.json             canonical artifact documents
//   ledger/log.jsonl               append-only process records
//   ledger/LOCK                    advisory writer lock
//   certificates/                  issued certificates + registry.jsonl
//   staging/<attempt>/             capture-runner working directories
//   replays/<process>/<attempt>/   replay working directories
class Repo {
 public:
  static fs::path default_root();  // $CERTPRO_ROOT or ./.certpro
  static Repo init(const fs::path& root);
  static Repo open(const fs::path& root);

  const fs::path& root() const { return root_; }
  fs::path objects_dir() const { return root_ / "objects"; }
  fs::path meta_dir() const { return root_ / "meta"; }
  fs::path ledger_dir() const { return root_ / "ledger"; }
  fs::path ledger_file() const { return root_ / "ledger" / "log.jsonl"; }
  fs::path lock_file() const { return root_ / "ledger" / "LOCK"; }
  fs::path certificates_dir() const { return root_ / "certificates"; }
  fs::path registry_file() const { return root_ / "certificates" / "registry.jsonl"; }
  fs::path staging_dir() const { return root_ / "staging"; }
  fs::path replays_dir() const { return root_ / "replays"; }

 private:
  explicit Repo(fs::path root) : root_(std::move(root)) {}
  fs::path root_;
};

// RAII advisory lock on ledger/LOCK; serializes writers across processes.
class RepoLock {
 public:
  explicit RepoLock(const Repo& repo);
  ~RepoLock();
  RepoLock(const RepoLock&) = delete;
  RepoLock& operator=(const RepoLock&) = delete;

 private:
  int fd_ = -1;
};

// Write-to-temp-then-rename in the target's directory; readers never see a
// partial file.
void atomic_write_file(const fs::path& target, const std::string& bytes);

std::string read_file(const fs::path& path);

}  // namespace certpro
