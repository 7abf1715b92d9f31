#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace certpro {

using Json = nlohmann::json;

// Canonical text form: UTF-8, keys sorted, no insignificant whitespace.
// nlohmann's default object (std::map-backed) already sorts keys, so a
// compact dump of any Json built here is canonical.
inline std::string canonical_dump(const Json& j) { return j.dump(); }

struct ArtifactId {
  std::string digest;  // 64 lowercase hex chars

  friend auto operator<=>(const ArtifactId&, const ArtifactId&) = default;
};

struct SubjectMetadata {
  std::string subject_id;
  std::string cohort;
  std::map<std::string, std::string> demographics;
  std::map<std::string, std::string> collection;
  std::string recorded_at;  // stamp of the ingestion event that added this entry
};

struct ArtifactMeta {
  std::string created_at;
  std::string storage_ref;
  std::string file_type;
  std::string data_format;
  std::string modality;
  std::uint64_t byte_size = 0;
  std::map<std::string, std::string> labels;
};

struct Artifact {
  ArtifactId id;
  ArtifactMeta meta;
  std::vector<SubjectMetadata> subjects;
};

struct DependencySpec {
  std::string name;
  std::string version;
};

struct EnvironmentDescriptor {
  std::string os_name;
  std::string os_version;
  std::string architecture;
  std::map<std::string, std::string> hardware;
  std::map<std::string, std::string> tool_versions;
};

struct ExecutionDetails {
  std::optional<std::string> code_ref;  // ArtifactId of the stored code archive
  std::map<std::string, std::string> config;
  std::optional<std::string> config_ref;
  std::vector<DependencySpec> dependencies;
  EnvironmentDescriptor environment;
  std::vector<std::string> data_dependencies;
  std::vector<std::string> additional_components;
};

struct ProcessRecord {
  std::string process_id;  // digest of the canonical record body
  std::string transformation_type;
  std::vector<std::string> inputs;   // artifact digests, declared order
  std::vector<std::string> outputs;  // artifact digests, declared order
  std::optional<ExecutionDetails> details;  // absent only for ingestion
  std::string agent;
  std::string started_at;
  std::string finished_at;
  int exit_status = 0;
  bool nondeterministic = false;

  bool is_ingestion() const { return transformation_type == "ingestion"; }
};

// Reserved config keys the capture runner uses to make a record replayable.
inline constexpr const char* kConfigArgv = "certpro.argv";      // JSON array of strings
inline constexpr const char* kConfigInputs = "certpro.inputs";  // JSON object name -> digest
inline constexpr const char* kConfigOutputs = "certpro.outputs";  // JSON array of names

Json to_json(const SubjectMetadata& s);
Json to_json(const ArtifactMeta& m);
Json to_json(const Artifact& a);
Json to_json(const DependencySpec& d);
Json to_json(const EnvironmentDescriptor& e);
Json to_json(const ExecutionDetails& d);
Json to_json(const ProcessRecord& r);  // includes process_id

// Strict parsers; throw Error(Errc::Schema) naming the offending field.
SubjectMetadata subject_from_json(const Json& j, const std::string& at);
ArtifactMeta meta_from_json(const Json& j, const std::string& at);
Artifact artifact_from_json(const Json& j, const std::string& at);
EnvironmentDescriptor environment_from_json(const Json& j, const std::string& at);
ExecutionDetails details_from_json(const Json& j, const std::string& at);
ProcessRecord process_from_json(const Json& j, const std::string& at);

// Digest of the canonical record body with process_id excluded.
std::string compute_process_id(const ProcessRecord& r);

// Field-level invariants (timestamps, digest shapes, ingestion rules).
// Returns human-readable violation messages, empty when valid.
std::vector<std::string> check_record_invariants(const ProcessRecord& r);

}  // namespace certpro
