#pragma once

#include <map>
#include <string>
#include <vector>

#include "certpro/graph.hpp"
#include "certpro/repo.hpp"
#include "certpro/store.hpp"
#include "certpro/types.hpp"

namespace certpro {

enum class EnvCheck { Strict, Warn, Skip };

struct ReplayPolicy {
  EnvCheck environment_check = EnvCheck::Warn;
  unsigned timeout_seconds = 3600;
  bool keep_workdirs = false;
};

enum class ReplayStatus { Match, Divergent, Unverifiable, EnvMismatch, Failed };

const char* replay_status_name(ReplayStatus s);

struct OutputComparison {
  std::string name;      // declared output filename
  std::string recorded;  // ArtifactId at capture time
  std::string replayed;  // digest of the re-executed output ("" if absent)
  bool equal = false;
};

struct ReplayResult {
  std::string process_id;
  ReplayStatus status = ReplayStatus::Failed;
  std::vector<OutputComparison> comparisons;
  std::vector<std::string> notes;
};

Json to_json(const ReplayResult& r);

// Re-executes recorded steps from stored inputs and code and compares the
// produced bytes against the recorded output digests. Never touches the
// ledger or any recorded object; replayed bytes land under
// replays/<process>/<attempt>/.
class ReplayEngine {
 public:
  ReplayEngine(const Repo& repo, const ArtifactStore& store, const Ledger& ledger);

  ReplayResult replay_process(const std::string& process_id, const ReplayPolicy& policy);

  // Replays every non-ingestion process in the roots' ancestry in
  // topological order. Downstream steps see recorded inputs where upstream
  // matched and the quarantined replayed bytes where it diverged, so
  // divergence propagation is observable. A launch failure aborts the
  // remaining steps; results produced so far are returned.
  std::vector<ReplayResult> replay_subgraph(const std::vector<std::string>& roots,
                                            const ReplayPolicy& policy);

 private:
  // substitutions: recorded artifact digest -> path of replayed bytes.
  ReplayResult replay_one(const ProcessRecord& rec, const ReplayPolicy& policy,
                          const std::map<std::string, fs::path>& substitutions,
                          std::map<std::string, fs::path>* quarantined);

  Repo repo_;
  const ArtifactStore* store_;
  const Ledger* ledger_;
};

}  // namespace certpro
