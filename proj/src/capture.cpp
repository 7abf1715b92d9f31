#include "certpro/capture.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/utsname.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "certpro/digest.hpp"
#include "certpro/errors.hpp"
#include "certpro/timeutil.hpp"

namespace certpro {

namespace {

std::string fresh_attempt_id() {
  static std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream os;
  os << std::hex << std::time(nullptr) << "-" << rng();
  return os.str();
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool is_safe_relative(const fs::path& p) {
  if (p.empty() || p.is_absolute()) return false;
  for (const auto& part : p)
    if (part == "..") return false;
  return true;
}

std::string extension_tag(const fs::path& p) {
  std::string ext = p.extension().string();
  if (!ext.empty() && ext.front() == '.') ext.erase(0, 1);
  return ext;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::string agent_name() {
  if (const char* u = std::getenv("USER"); u && *u) return u;
  return "analyst";
}

std::string first_line(const std::string& s) {
  auto pos = s.find('\n');
  return trim(pos == std::string::npos ? s : s.substr(0, pos));
}

std::string tail_of_file(const fs::path& p, std::size_t max_bytes = 2048) {
  if (!fs::exists(p)) return {};
  std::string all = read_file(p);
  if (all.size() > max_bytes) all.erase(0, all.size() - max_bytes);
  return all;
}

}  // namespace

SubprocessResult run_command(const std::vector<std::string>& argv, const fs::path& cwd,
                             const fs::path& stdout_file, const fs::path& stderr_file,
                             std::chrono::seconds timeout) {
  if (argv.empty()) fail(Errc::Validation, "empty command");

  int exec_pipe[2];
  if (pipe2(exec_pipe, O_CLOEXEC) != 0) fail(Errc::Io, "pipe failed");

  pid_t pid = fork();
  if (pid < 0) {
    ::close(exec_pipe[0]);
    ::close(exec_pipe[1]);
    fail(Errc::Io, "fork failed");
  }

  if (pid == 0) {
    ::close(exec_pipe[0]);
    setpgid(0, 0);
    if (chdir(cwd.c_str()) != 0) _exit(126);
    int out = ::open(stdout_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    int err = ::open(stderr_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (out < 0 || err < 0) _exit(126);
    dup2(out, STDOUT_FILENO);
    dup2(err, STDERR_FILENO);
    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    execvp(cargv[0], cargv.data());
    int e = errno;  // exec failed; report through the pipe
    ssize_t ignored = ::write(exec_pipe[1], &e, sizeof(e));
    (void)ignored;
    _exit(127);
  }

  ::close(exec_pipe[1]);
  SubprocessResult result;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  for (;;) {
    pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) {
      ::close(exec_pipe[0]);
      fail(Errc::Io, "waitpid failed");
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      result.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

  int exec_errno = 0;
  if (::read(exec_pipe[0], &exec_errno, sizeof(exec_errno)) == sizeof(exec_errno))
    result.launch_failed = true;
  ::close(exec_pipe[0]);

  if (WIFEXITED(status))
    result.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status))
    result.exit_code = 128 + WTERMSIG(status);
  return result;
}

EnvironmentDescriptor snapshot_environment(const std::vector<std::string>& tool_probes) {
  EnvironmentDescriptor env;
  struct utsname un{};
  if (uname(&un) == 0) {
    env.os_name = un.sysname;
    env.os_version = un.release;
    env.architecture = un.machine;
  } else {
    env.os_name = env.os_version = env.architecture = "unknown";
  }

  env.hardware["cpu_model"] = "unknown";
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpuinfo, line)) {
    if (line.rfind("model name", 0) == 0) {
      auto pos = line.find(':');
      if (pos != std::string::npos) env.hardware["cpu_model"] = trim(line.substr(pos + 1));
      break;
    }
  }
  long pages = sysconf(_SC_PHYS_PAGES);
  long page_size = sysconf(_SC_PAGE_SIZE);
  env.hardware["memory_bytes"] =
      (pages > 0 && page_size > 0) ? std::to_string(static_cast<long long>(pages) * page_size)
                                   : "unknown";

  for (const auto& tool : tool_probes) {
    std::string version = "unknown";
    fs::path tmp = fs::temp_directory_path() / ("certpro-probe-" + fresh_attempt_id());
    try {
      SubprocessResult r = run_command({tool, "--version"}, fs::temp_directory_path(), tmp,
                                       "/dev/null", std::chrono::seconds(10));
      if (!r.launch_failed && !r.timed_out && r.exit_code == 0) {
        std::string head = first_line(read_file(tmp));
        if (!head.empty()) version = head;
      }
    } catch (const Error&) {
      // unavailable probe stays "unknown"
    }
    std::error_code ec;
    fs::remove(tmp, ec);
    env.tool_versions[tool] = version;
  }
  return env;
}

std::string build_code_archive(const std::vector<std::pair<std::string, std::string>>& files) {
  std::vector<std::pair<std::string, std::string>> sorted = files;
  std::sort(sorted.begin(), sorted.end());
  std::string out = "CERTPRO-CODE-ARCHIVE 1\n";
  for (const auto& [name, content] : sorted) {
    out += name;
    out += '\n';
    out += std::to_string(content.size());
    out += '\n';
    out += content;
    out += '\n';
  }
  return out;
}

std::vector<DependencySpec> parse_dependency_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(Errc::Io, "cannot open dependency manifest " + path.string());
  std::vector<DependencySpec> deps;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto pos = t.find('=');
    if (pos == std::string::npos || pos == 0 || pos + 1 == t.size())
      fail(Errc::Validation,
           "manifest line " + std::to_string(lineno) + " is not name=version: '" + t + "'");
    deps.push_back({trim(t.substr(0, pos)), trim(t.substr(pos + 1))});
  }
  return deps;
}

CaptureRunner::CaptureRunner(const Repo& repo, ArtifactStore& store, Ledger& ledger,
                             CaptureOptions opts)
    : repo_(repo), store_(&store), ledger_(&ledger), opts_(std::move(opts)) {}

ArtifactId CaptureRunner::ingest_raw(const fs::path& path, ArtifactMeta meta,
                                     const std::vector<SubjectMetadata>& subjects) {
  if (!fs::exists(path) || !fs::is_regular_file(path))
    fail(Errc::Io, "cannot read " + path.string());
  std::string bytes = read_file(path);
  if (meta.file_type.empty()) meta.file_type = extension_tag(path);
  if (meta.data_format.empty()) meta.data_format = upper(extension_tag(path));
  ArtifactId id = store_->put(bytes, std::move(meta), subjects);

  ProcessRecord rec;
  rec.transformation_type = "ingestion";
  rec.outputs = {id.digest};
  rec.agent = agent_name();
  rec.started_at = rec.finished_at = now_rfc3339();
  rec.exit_status = 0;
  rec.process_id = ledger_->record(rec);
  return id;
}

ProcessRecord CaptureRunner::run_step(const StepSpec& spec) {
  if (spec.command.empty()) fail(Errc::Validation, "step command is empty");
  if (spec.declared_outputs.empty()) fail(Errc::Validation, "step declares no outputs");
  {
    std::set<std::string> names;
    for (const auto& [digest, name] : spec.declared_inputs) {
      if (!is_safe_relative(name)) fail(Errc::Validation, "unsafe staging name '" + name + "'");
      if (!names.insert(name).second) fail(Errc::Validation, "duplicate staging name '" + name + "'");
    }
    for (const auto& name : spec.declared_outputs)
      if (!is_safe_relative(name)) fail(Errc::Validation, "unsafe output name '" + name + "'");
  }

  // Resolve every declared input up front; nothing is staged on failure.
  std::vector<std::pair<std::string, std::string>> input_bytes;  // (staging name, bytes)
  for (const auto& [digest, name] : spec.declared_inputs) {
    if (!store_->has_object(ArtifactId{digest}))
      fail(Errc::MissingInput, "input " + digest + " is not in the store");
    input_bytes.emplace_back(name, store_->get(ArtifactId{digest}));
  }

  const std::string attempt = fresh_attempt_id();
  const fs::path attempt_dir = repo_.staging_dir() / attempt;
  const fs::path work = attempt_dir / "work";
  fs::create_directories(work);

  // Hermetic staging: the working directory holds exactly the declared
  // inputs plus the captured code files, nothing else.
  for (const auto& [name, bytes] : input_bytes) {
    fs::path dst = work / name;
    fs::create_directories(dst.parent_path());
    atomic_write_file(dst, bytes);
  }

  std::vector<std::pair<std::string, std::string>> code_files;  // (relative path, content)
  for (const auto& token : spec.command) {
    fs::path rel(token);
    if (!is_safe_relative(rel)) continue;
    fs::path src = spec.code_dir ? *spec.code_dir / rel : rel;
    if (fs::exists(work / rel) && fs::is_regular_file(work / rel)) {
      code_files.emplace_back(rel.generic_string(), read_file(work / rel));
    } else if (fs::exists(src) && fs::is_regular_file(src)) {
      std::string content = read_file(src);
      fs::path dst = work / rel;
      fs::create_directories(dst.parent_path());
      atomic_write_file(dst, content);
      code_files.emplace_back(rel.generic_string(), std::move(content));
    }
  }

  const std::string started_at = now_rfc3339();
  SubprocessResult run = run_command(spec.command, work, attempt_dir / "stdout",
                                     attempt_dir / "stderr", opts_.timeout);
  const std::string finished_at = now_rfc3339();

  if (run.timed_out)
    fail(Errc::StepFailed, "step timed out after " + std::to_string(opts_.timeout.count()) +
                               "s; staging preserved at " + attempt_dir.string());
  if (run.launch_failed || run.exit_code != 0)
    fail(Errc::StepFailed, "command exited " + std::to_string(run.exit_code) + "; stderr: " +
                               tail_of_file(attempt_dir / "stderr") + " (staging at " +
                               attempt_dir.string() + ")");

  std::vector<std::pair<std::string, std::string>> outputs;  // (name, bytes)
  for (const auto& name : spec.declared_outputs) {
    fs::path p = work / name;
    if (!fs::exists(p) || !fs::is_regular_file(p))
      fail(Errc::MissingOutput, "declared output '" + name + "' was not produced (staging at " +
                                    attempt_dir.string() + ")");
    outputs.emplace_back(name, read_file(p));
  }

  // Reject duplicate producers before committing anything to the store or
  // ledger; identity transforms (output bytes == an input) are exempt.
  std::set<std::string> input_ids;
  for (const auto& [digest, name] : spec.declared_inputs) input_ids.insert(digest);
  for (const auto& [name, bytes] : outputs) {
    std::string digest = sha256_hex(bytes);
    if (!input_ids.count(digest) && !ledger_->producers_of(digest).empty())
      fail(Errc::DuplicateProducer, "output '" + name + "' (" + digest + ") already has a producer");
  }

  ProcessRecord rec;
  rec.transformation_type = spec.transformation_type;
  rec.agent = spec.agent.empty() ? agent_name() : spec.agent;
  rec.started_at = started_at;
  rec.finished_at = finished_at;
  rec.exit_status = 0;
  rec.nondeterministic = spec.nondeterministic;
  for (const auto& [digest, name] : spec.declared_inputs) rec.inputs.push_back(digest);

  ExecutionDetails details;
  details.environment = snapshot_environment(opts_.tool_probes);
  if (spec.dependency_manifest) details.dependencies = parse_dependency_manifest(*spec.dependency_manifest);

  ArtifactMeta archive_meta;
  archive_meta.file_type = "code";
  archive_meta.data_format = "CODE-ARCHIVE";
  archive_meta.modality = "code";
  details.code_ref = store_->put(build_code_archive(code_files), archive_meta).digest;
  for (const auto& [name, content] : code_files) {
    ArtifactMeta m;
    m.file_type = extension_tag(name);
    m.data_format = upper(extension_tag(name));
    m.modality = "code";
    m.labels["role"] = "code";
    details.additional_components.push_back(store_->put(content, m).digest);
  }
  std::sort(details.additional_components.begin(), details.additional_components.end());
  details.additional_components.erase(
      std::unique(details.additional_components.begin(), details.additional_components.end()),
      details.additional_components.end());

  details.config = spec.config;
  details.config["certpro.argv"] = canonical_dump(Json(spec.command));
  {
    Json in = Json::object();
    for (const auto& [digest, name] : spec.declared_inputs) in[name] = digest;
    details.config["certpro.inputs"] = canonical_dump(in);
    details.config["certpro.outputs"] = canonical_dump(Json(spec.declared_outputs));
  }

  for (const auto& [name, bytes] : outputs) {
    ArtifactMeta m;
    m.file_type = extension_tag(name);
    m.data_format = upper(extension_tag(name));
    rec.outputs.push_back(store_->put(bytes, m).digest);
  }

  // Captured streams are addressable but stay off the structural graph.
  for (const char* stream : {"stdout", "stderr"}) {
    ArtifactMeta m;
    m.file_type = "txt";
    m.data_format = "TXT";
    m.labels["stream"] = stream;
    store_->put(read_file(attempt_dir / stream), m);
  }

  rec.details = std::move(details);
  rec.process_id = ledger_->record(rec);

  if (!opts_.keep_staging_on_success) {
    std::error_code ec;
    fs::remove_all(attempt_dir, ec);
  }
  return rec;
}

}  // namespace certpro
