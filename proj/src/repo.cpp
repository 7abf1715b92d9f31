#include "certpro/repo.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "certpro/errors.hpp"

namespace certpro {

fs::path Repo::default_root() {
  if (const char* env = std::getenv("CERTPRO_ROOT"); env && *env) return fs::path(env);
  return fs::path(".certpro");
}

Repo Repo::init(const fs::path& root) {
  std::error_code ec;
  for (const char* sub : {"objects", "meta", "ledger", "certificates", "staging", "replays"}) {
    fs::create_directories(root / sub, ec);
    if (ec) fail(Errc::Storage, "cannot create " + (root / sub).string() + ": " + ec.message());
  }
  Repo repo(root);
  if (!fs::exists(repo.ledger_file())) {
    std::ofstream f(repo.ledger_file());
    if (!f) fail(Errc::Storage, "cannot create ledger at " + repo.ledger_file().string());
  }
  if (!fs::exists(repo.lock_file())) std::ofstream(repo.lock_file());
  return repo;
}

Repo Repo::open(const fs::path& root) {
  if (!fs::is_directory(root / "objects") || !fs::exists(root / "ledger" / "log.jsonl"))
    fail(Errc::Storage, "no repository at " + root.string() + " (run 'certpro init')");
  return Repo(root);
}

RepoLock::RepoLock(const Repo& repo) {
  fd_ = ::open(repo.lock_file().c_str(), O_RDWR | O_CREAT, 0644);
  if (fd_ < 0) fail(Errc::Storage, "cannot open lock file " + repo.lock_file().string());
  if (::flock(fd_, LOCK_EX) != 0) {
    ::close(fd_);
    fd_ = -1;
    fail(Errc::Storage, "cannot acquire repository lock");
  }
}

RepoLock::~RepoLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

void atomic_write_file(const fs::path& target, const std::string& bytes) {
  static std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream tmp_name;
  tmp_name << ".tmp-" << ::getpid() << "-" << std::hex << rng();
  fs::path tmp = target.parent_path() / tmp_name.str();
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) fail(Errc::Storage, "cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      fail(Errc::Storage, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(Errc::Storage, "cannot rename into place: " + target.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  if (!f.good() && !f.eof()) fail(Errc::Io, "read error on " + path.string());
  return buf.str();
}

}  // namespace certpro
