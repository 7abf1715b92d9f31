#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "certpro/graph.hpp"
#include "certpro/repo.hpp"
#include "certpro/store.hpp"
#include "certpro/types.hpp"

namespace certpro {

struct StepSpec {
  std::vector<std::string> command;  // program + args
  std::vector<std::pair<std::string, std::string>> declared_inputs;  // (digest, staging name)
  std::vector<std::string> declared_outputs;  // expected filenames in the staging dir
  std::string transformation_type;
  std::map<std::string, std::string> config;
  bool nondeterministic = false;
  std::optional<fs::path> dependency_manifest;  // lines of name=version, '#' comments
  std::string agent;
  std::optional<fs::path> code_dir;  // where command-token code files resolve (default: cwd)
};

struct CaptureOptions {
  std::chrono::seconds timeout{3600};
  std::vector<std::string> tool_probes;  // tools to probe with `<tool> --version`
  bool keep_staging_on_success = false;
};

struct SubprocessResult {
  int exit_code = -1;
  bool timed_out = false;
  bool launch_failed = false;
};

// Runs argv with the given working directory, stdout/stderr redirected to
// files. The child is its own process group so a timeout kills the whole
// tree.
SubprocessResult run_command(const std::vector<std::string>& argv, const fs::path& cwd,
                             const fs::path& stdout_file, const fs::path& stderr_file,
                             std::chrono::seconds timeout);

// Host snapshot: uname fields, cpu/memory summary, probed tool versions.
// Unavailable fields come back as "unknown"; no side effects.
EnvironmentDescriptor snapshot_environment(const std::vector<std::string>& tool_probes = {});

// Deterministic archive of the step's code files: entries sorted by name,
// no timestamps, so identical code yields an identical digest.
std::string build_code_archive(const std::vector<std::pair<std::string, std::string>>& files);

// Parses a dependency manifest (UTF-8 `name=version` lines, '#' comments).
std::vector<DependencySpec> parse_dependency_manifest(const fs::path& path);

class CaptureRunner {
 public:
  CaptureRunner(const Repo& repo, ArtifactStore& store, Ledger& ledger, CaptureOptions opts = {});

  // Stores the file and appends the boundary ingestion record (no inputs).
  ArtifactId ingest_raw(const fs::path& path, ArtifactMeta meta,
                        const std::vector<SubjectMetadata>& subjects = {});

  // Stages declared inputs into a fresh hermetic directory, executes the
  // command there, stores outputs and code, snapshots the environment and
  // appends a complete ProcessRecord. On any failure nothing reaches the
  // ledger and the staging directory is preserved for inspection.
  ProcessRecord run_step(const StepSpec& spec);

 private:
  Repo repo_;
  ArtifactStore* store_;
  Ledger* ledger_;
  CaptureOptions opts_;
};

}  // namespace certpro
