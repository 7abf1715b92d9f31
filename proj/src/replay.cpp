#include "certpro/replay.hpp"

#include <algorithm>

#include "certpro/capture.hpp"
#include "certpro/digest.hpp"
#include "certpro/errors.hpp"
#include "certpro/timeutil.hpp"

namespace certpro {

namespace {

std::vector<std::pair<std::string, std::string>> parse_code_archive(const std::string& blob) {
  const std::string header = "CERTPRO-CODE-ARCHIVE 1\n";
  if (blob.rfind(header, 0) != 0) fail(Errc::Integrity, "unrecognized code archive format");
  std::vector<std::pair<std::string, std::string>> files;
  size_t pos = header.size();
  while (pos < blob.size()) {
    size_t name_end = blob.find('\n', pos);
    if (name_end == std::string::npos) fail(Errc::Integrity, "truncated code archive");
    std::string name = blob.substr(pos, name_end - pos);
    size_t size_end = blob.find('\n', name_end + 1);
    if (size_end == std::string::npos) fail(Errc::Integrity, "truncated code archive");
    size_t size = std::stoull(blob.substr(name_end + 1, size_end - name_end - 1));
    if (size_end + 1 + size + 1 > blob.size() + 1) fail(Errc::Integrity, "truncated code archive");
    files.emplace_back(name, blob.substr(size_end + 1, size));
    pos = size_end + 1 + size + 1;  // entry trailer newline
  }
  return files;
}

std::string next_attempt_dir_name(const fs::path& process_dir) {
  unsigned n = 1;
  std::error_code ec;
  if (fs::exists(process_dir, ec))
    for (const auto& e : fs::directory_iterator(process_dir)) {
      try {
        n = std::max(n, static_cast<unsigned>(std::stoul(e.path().filename().string())) + 1);
      } catch (...) {
      }
    }
  return std::to_string(n);
}

struct ReplaySpec {
  std::vector<std::string> argv;
  std::map<std::string, std::string> inputs;  // staging name -> digest
  std::vector<std::string> output_names;      // aligned with record.outputs
};

ReplaySpec replay_spec_of(const ProcessRecord& rec) {
  if (!rec.details) fail(Errc::Replay, "process " + rec.process_id + " has no execution details");
  const auto& config = rec.details->config;
  auto get = [&](const char* key) -> Json {
    auto it = config.find(key);
    if (it == config.end())
      fail(Errc::Replay, "process " + rec.process_id + " lacks runner config '" + key + "'");
    Json j = Json::parse(it->second, nullptr, false);
    if (j.is_discarded()) fail(Errc::Replay, "corrupt runner config '" + std::string(key) + "'");
    return j;
  };
  ReplaySpec spec;
  Json argv = get(kConfigArgv);
  for (const Json& a : argv) spec.argv.push_back(a.get<std::string>());
  Json inputs = get(kConfigInputs);
  for (const auto& [name, digest] : inputs.items()) spec.inputs[name] = digest.get<std::string>();
  Json outputs = get(kConfigOutputs);
  for (const Json& n : outputs) spec.output_names.push_back(n.get<std::string>());
  if (spec.output_names.size() != rec.outputs.size())
    fail(Errc::Replay, "declared output names do not align with recorded outputs");
  return spec;
}

}  // namespace

const char* replay_status_name(ReplayStatus s) {
  switch (s) {
    case ReplayStatus::Match: return "match";
    case ReplayStatus::Divergent: return "divergent";
    case ReplayStatus::Unverifiable: return "unverifiable";
    case ReplayStatus::EnvMismatch: return "env_mismatch";
    case ReplayStatus::Failed: return "failed";
  }
  return "failed";
}

Json to_json(const ReplayResult& r) {
  Json comparisons = Json::array();
  for (const auto& c : r.comparisons)
    comparisons.push_back(Json{{"equal", c.equal},
                               {"name", c.name},
                               {"recorded", c.recorded},
                               {"replayed", c.replayed}});
  return Json{{"comparisons", comparisons},
              {"notes", r.notes},
              {"process_id", r.process_id},
              {"status", replay_status_name(r.status)}};
}

ReplayEngine::ReplayEngine(const Repo& repo, const ArtifactStore& store, const Ledger& ledger)
    : repo_(repo), store_(&store), ledger_(&ledger) {}

ReplayResult ReplayEngine::replay_one(const ProcessRecord& rec, const ReplayPolicy& policy,
                                      const std::map<std::string, fs::path>& substitutions,
                                      std::map<std::string, fs::path>* quarantined) {
  if (rec.is_ingestion())
    fail(Errc::NotReplayable, "process " + rec.process_id + " is an ingestion record");
  ReplaySpec spec = replay_spec_of(rec);

  for (const auto& [name, digest] : spec.inputs)
    if (!substitutions.count(digest) && store_->verify(ArtifactId{digest}) != VerifyResult::Ok)
      fail(Errc::Integrity, "recorded input " + digest + " does not verify");
  if (rec.details->code_ref && store_->verify(ArtifactId{*rec.details->code_ref}) != VerifyResult::Ok)
    fail(Errc::Integrity, "recorded code archive does not verify");

  ReplayResult result;
  result.process_id = rec.process_id;

  // Environment gate: descriptor comparison, not virtualization.
  if (policy.environment_check != EnvCheck::Skip) {
    const EnvironmentDescriptor& recorded = rec.details->environment;
    std::vector<std::string> probes;
    for (const auto& [tool, v] : recorded.tool_versions) probes.push_back(tool);
    EnvironmentDescriptor current = snapshot_environment(probes);
    std::vector<std::string> diffs;
    if (current.os_name != recorded.os_name)
      diffs.push_back("os_name: recorded '" + recorded.os_name + "', current '" + current.os_name + "'");
    if (current.architecture != recorded.architecture)
      diffs.push_back("architecture: recorded '" + recorded.architecture + "', current '" +
                      current.architecture + "'");
    for (const auto& [tool, version] : recorded.tool_versions) {
      const std::string now = current.tool_versions.count(tool) ? current.tool_versions[tool] : "unknown";
      if (now != version)
        diffs.push_back("tool " + tool + ": recorded '" + version + "', current '" + now + "'");
    }
    for (const auto& d : diffs) result.notes.push_back("environment difference: " + d);
    if (!diffs.empty() && policy.environment_check == EnvCheck::Strict) {
      result.status = ReplayStatus::EnvMismatch;
      return result;
    }
  }

  const fs::path process_dir = repo_.replays_dir() / rec.process_id;
  const fs::path attempt_dir = process_dir / next_attempt_dir_name(process_dir);
  const fs::path work = attempt_dir / "work";
  const fs::path quarantine = attempt_dir / "outputs";
  fs::create_directories(work);
  fs::create_directories(quarantine);

  for (const auto& [name, digest] : spec.inputs) {
    fs::path dst = work / name;
    fs::create_directories(dst.parent_path());
    auto sub = substitutions.find(digest);
    if (sub != substitutions.end()) {
      atomic_write_file(dst, read_file(sub->second));
      result.notes.push_back("input " + digest + " substituted with replayed bytes");
    } else {
      atomic_write_file(dst, store_->get(ArtifactId{digest}));
    }
  }
  if (rec.details->code_ref)
    for (const auto& [name, content] : parse_code_archive(store_->get(ArtifactId{*rec.details->code_ref}))) {
      fs::path dst = work / name;
      fs::create_directories(dst.parent_path());
      atomic_write_file(dst, content);
    }

  SubprocessResult run = run_command(spec.argv, work, attempt_dir / "stdout",
                                     attempt_dir / "stderr", std::chrono::seconds(policy.timeout_seconds));
  if (run.launch_failed)
    fail(Errc::Replay, "command for " + rec.process_id + " could not be launched");

  bool all_equal = true;
  bool produced_all = true;
  for (size_t i = 0; i < spec.output_names.size(); ++i) {
    OutputComparison cmp;
    cmp.name = spec.output_names[i];
    cmp.recorded = rec.outputs[i];
    fs::path p = work / cmp.name;
    if (fs::exists(p) && fs::is_regular_file(p)) {
      std::string bytes = read_file(p);
      cmp.replayed = sha256_hex(bytes);
      cmp.equal = cmp.replayed == cmp.recorded;
      fs::path qpath = quarantine / cmp.name;
      fs::create_directories(qpath.parent_path());
      atomic_write_file(qpath, bytes);
      if (!cmp.equal && quarantined) (*quarantined)[cmp.recorded] = qpath;
    } else {
      produced_all = false;
      cmp.equal = false;
    }
    all_equal = all_equal && cmp.equal;
    result.comparisons.push_back(std::move(cmp));
  }

  if (run.timed_out) {
    result.status = ReplayStatus::Failed;
    result.notes.push_back("replay timed out after " + std::to_string(policy.timeout_seconds) + "s");
  } else if (rec.nondeterministic) {
    result.status = ReplayStatus::Unverifiable;  // comparisons still reported
  } else if (run.exit_code != 0 || !produced_all) {
    result.status = ReplayStatus::Failed;
    result.notes.push_back("command exited " + std::to_string(run.exit_code));
  } else {
    result.status = all_equal ? ReplayStatus::Match : ReplayStatus::Divergent;
  }

  atomic_write_file(attempt_dir / "report.json", canonical_dump(to_json(result)));
  if (!policy.keep_workdirs) {
    std::error_code ec;
    fs::remove_all(work, ec);
  }
  return result;
}

ReplayResult ReplayEngine::replay_process(const std::string& process_id,
                                          const ReplayPolicy& policy) {
  if (!ledger_->has_process(process_id)) fail(Errc::NotFound, "no process " + process_id);
  return replay_one(ledger_->process(process_id), policy, {}, nullptr);
}

std::vector<ReplayResult> ReplayEngine::replay_subgraph(const std::vector<std::string>& roots,
                                                        const ReplayPolicy& policy) {
  TraceGraph g = ledger_->ancestry(roots);
  if (auto violations = validate_graph(g); !violations.empty())
    fail(Errc::Integrity, "ancestry does not validate: " + violations.front().message);

  std::vector<ReplayResult> results;
  std::map<std::string, fs::path> substitutions;
  for (const std::string& pid : topo_order(g)) {
    const ProcessRecord& rec = g.processes.at(pid);
    if (rec.is_ingestion()) continue;
    try {
      results.push_back(replay_one(rec, policy, substitutions, &substitutions));
    } catch (const Error& e) {
      if (e.code() != Errc::Replay) throw;
      // A launch failure aborts the remaining steps; surface it in-band and
      // return what already ran.
      ReplayResult aborted;
      aborted.process_id = pid;
      aborted.status = ReplayStatus::Failed;
      aborted.notes.push_back(e.what());
      results.push_back(std::move(aborted));
      break;
    }
  }
  return results;
}

}  // namespace certpro
