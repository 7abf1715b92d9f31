#include "certpro/types.hpp"

#include "certpro/digest.hpp"
#include "certpro/errors.hpp"
#include "certpro/timeutil.hpp"

namespace certpro {

namespace {

const Json& field(const Json& j, const char* key, const std::string& at) {
  if (!j.is_object()) fail(Errc::Schema, at + ": expected object");
  auto it = j.find(key);
  if (it == j.end()) fail(Errc::Schema, at + ": missing field '" + key + "'");
  return *it;
}

std::string str_field(const Json& j, const char* key, const std::string& at) {
  const Json& v = field(j, key, at);
  if (!v.is_string()) fail(Errc::Schema, at + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

std::map<std::string, std::string> map_field(const Json& j, const char* key, const std::string& at) {
  const Json& v = field(j, key, at);
  if (!v.is_object()) fail(Errc::Schema, at + ": field '" + key + "' must be an object");
  std::map<std::string, std::string> out;
  for (auto it = v.begin(); it != v.end(); ++it) {
    if (!it.value().is_string())
      fail(Errc::Schema, at + ": field '" + key + "' values must be strings");
    out[it.key()] = it.value().get<std::string>();
  }
  return out;
}

std::vector<std::string> str_list_field(const Json& j, const char* key, const std::string& at) {
  const Json& v = field(j, key, at);
  if (!v.is_array()) fail(Errc::Schema, at + ": field '" + key + "' must be an array");
  std::vector<std::string> out;
  for (const Json& e : v) {
    if (!e.is_string()) fail(Errc::Schema, at + ": field '" + key + "' entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Json map_to_json(const std::map<std::string, std::string>& m) {
  Json j = Json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

}  // namespace

Json to_json(const SubjectMetadata& s) {
  return Json{{"cohort", s.cohort},
              {"collection", map_to_json(s.collection)},
              {"demographics", map_to_json(s.demographics)},
              {"recorded_at", s.recorded_at},
              {"subject_id", s.subject_id}};
}

Json to_json(const ArtifactMeta& m) {
  return Json{{"byte_size", m.byte_size},
              {"created_at", m.created_at},
              {"data_format", m.data_format},
              {"file_type", m.file_type},
              {"labels", map_to_json(m.labels)},
              {"modality", m.modality},
              {"storage_ref", m.storage_ref}};
}

Json to_json(const Artifact& a) {
  Json subjects = Json::array();
  for (const auto& s : a.subjects) subjects.push_back(to_json(s));
  return Json{{"id", a.id.digest}, {"meta", to_json(a.meta)}, {"subjects", subjects}};
}

Json to_json(const DependencySpec& d) {
  return Json{{"name", d.name}, {"version", d.version}};
}

Json to_json(const EnvironmentDescriptor& e) {
  return Json{{"architecture", e.architecture},
              {"hardware", map_to_json(e.hardware)},
              {"os_name", e.os_name},
              {"os_version", e.os_version},
              {"tool_versions", map_to_json(e.tool_versions)}};
}

Json to_json(const ExecutionDetails& d) {
  Json deps = Json::array();
  for (const auto& dep : d.dependencies) deps.push_back(to_json(dep));
  return Json{{"additional_components", d.additional_components},
              {"code_ref", d.code_ref ? Json(*d.code_ref) : Json(nullptr)},
              {"config", map_to_json(d.config)},
              {"config_ref", d.config_ref ? Json(*d.config_ref) : Json(nullptr)},
              {"data_dependencies", d.data_dependencies},
              {"dependencies", deps},
              {"environment", to_json(d.environment)}};
}

Json to_json(const ProcessRecord& r) {
  return Json{{"agent", r.agent},
              {"details", r.details ? to_json(*r.details) : Json(nullptr)},
              {"exit_status", r.exit_status},
              {"finished_at", r.finished_at},
              {"inputs", r.inputs},
              {"nondeterministic", r.nondeterministic},
              {"outputs", r.outputs},
              {"process_id", r.process_id},
              {"started_at", r.started_at},
              {"transformation_type", r.transformation_type}};
}

SubjectMetadata subject_from_json(const Json& j, const std::string& at) {
  SubjectMetadata s;
  s.subject_id = str_field(j, "subject_id", at);
  s.cohort = str_field(j, "cohort", at);
  s.demographics = map_field(j, "demographics", at);
  s.collection = map_field(j, "collection", at);
  s.recorded_at = str_field(j, "recorded_at", at);
  return s;
}

ArtifactMeta meta_from_json(const Json& j, const std::string& at) {
  ArtifactMeta m;
  m.created_at = str_field(j, "created_at", at);
  m.storage_ref = str_field(j, "storage_ref", at);
  m.file_type = str_field(j, "file_type", at);
  m.data_format = str_field(j, "data_format", at);
  m.modality = str_field(j, "modality", at);
  const Json& size = field(j, "byte_size", at);
  if (!size.is_number_unsigned()) fail(Errc::Schema, at + ": field 'byte_size' must be a non-negative integer");
  m.byte_size = size.get<std::uint64_t>();
  m.labels = map_field(j, "labels", at);
  return m;
}

Artifact artifact_from_json(const Json& j, const std::string& at) {
  Artifact a;
  a.id.digest = str_field(j, "id", at);
  a.meta = meta_from_json(field(j, "meta", at), at + ".meta");
  const Json& subjects = field(j, "subjects", at);
  if (!subjects.is_array()) fail(Errc::Schema, at + ": field 'subjects' must be an array");
  for (size_t i = 0; i < subjects.size(); ++i)
    a.subjects.push_back(subject_from_json(subjects[i], at + ".subjects[" + std::to_string(i) + "]"));
  return a;
}

EnvironmentDescriptor environment_from_json(const Json& j, const std::string& at) {
  EnvironmentDescriptor e;
  e.os_name = str_field(j, "os_name", at);
  e.os_version = str_field(j, "os_version", at);
  e.architecture = str_field(j, "architecture", at);
  e.hardware = map_field(j, "hardware", at);
  e.tool_versions = map_field(j, "tool_versions", at);
  return e;
}

ExecutionDetails details_from_json(const Json& j, const std::string& at) {
  ExecutionDetails d;
  const Json& code_ref = field(j, "code_ref", at);
  if (code_ref.is_string())
    d.code_ref = code_ref.get<std::string>();
  else if (!code_ref.is_null())
    fail(Errc::Schema, at + ": field 'code_ref' must be a string or null");
  d.config = map_field(j, "config", at);
  const Json& config_ref = field(j, "config_ref", at);
  if (config_ref.is_string())
    d.config_ref = config_ref.get<std::string>();
  else if (!config_ref.is_null())
    fail(Errc::Schema, at + ": field 'config_ref' must be a string or null");
  const Json& deps = field(j, "dependencies", at);
  if (!deps.is_array()) fail(Errc::Schema, at + ": field 'dependencies' must be an array");
  for (size_t i = 0; i < deps.size(); ++i) {
    const std::string dep_at = at + ".dependencies[" + std::to_string(i) + "]";
    d.dependencies.push_back(
        {str_field(deps[i], "name", dep_at), str_field(deps[i], "version", dep_at)});
  }
  d.environment = environment_from_json(field(j, "environment", at), at + ".environment");
  d.data_dependencies = str_list_field(j, "data_dependencies", at);
  d.additional_components = str_list_field(j, "additional_components", at);
  return d;
}

ProcessRecord process_from_json(const Json& j, const std::string& at) {
  ProcessRecord r;
  r.process_id = str_field(j, "process_id", at);
  r.transformation_type = str_field(j, "transformation_type", at);
  r.inputs = str_list_field(j, "inputs", at);
  r.outputs = str_list_field(j, "outputs", at);
  const Json& details = field(j, "details", at);
  if (!details.is_null()) r.details = details_from_json(details, at + ".details");
  r.agent = str_field(j, "agent", at);
  r.started_at = str_field(j, "started_at", at);
  r.finished_at = str_field(j, "finished_at", at);
  const Json& exit_status = field(j, "exit_status", at);
  if (!exit_status.is_number_integer()) fail(Errc::Schema, at + ": field 'exit_status' must be an integer");
  r.exit_status = exit_status.get<int>();
  const Json& nondet = field(j, "nondeterministic", at);
  if (!nondet.is_boolean()) fail(Errc::Schema, at + ": field 'nondeterministic' must be a boolean");
  r.nondeterministic = nondet.get<bool>();
  return r;
}

std::string compute_process_id(const ProcessRecord& r) {
  Json body = to_json(r);
  body.erase("process_id");
  return sha256_hex(canonical_dump(body));
}

std::vector<std::string> check_record_invariants(const ProcessRecord& r) {
  std::vector<std::string> v;
  if (r.transformation_type.empty()) v.push_back("transformation_type empty");
  if (!is_rfc3339_utc(r.started_at)) v.push_back("started_at not RFC 3339 UTC");
  if (!is_rfc3339_utc(r.finished_at)) v.push_back("finished_at not RFC 3339 UTC");
  if (is_rfc3339_utc(r.started_at) && is_rfc3339_utc(r.finished_at) && r.finished_at < r.started_at)
    v.push_back("finished_at precedes started_at");
  for (const auto& id : r.inputs)
    if (!is_hex_digest(id)) v.push_back("malformed input digest '" + id + "'");
  for (const auto& id : r.outputs)
    if (!is_hex_digest(id)) v.push_back("malformed output digest '" + id + "'");
  if (r.exit_status == 0 && r.outputs.empty()) v.push_back("successful record with no outputs");
  if (r.is_ingestion()) {
    if (!r.inputs.empty()) v.push_back("ingestion record with inputs");
  } else {
    if (r.inputs.empty()) v.push_back("non-ingestion record with no inputs");
    if (r.details && !r.details->code_ref) v.push_back("non-ingestion record without code_ref");
  }
  if (r.details) {
    if (r.details->code_ref && !is_hex_digest(*r.details->code_ref))
      v.push_back("malformed code_ref digest");
    for (const auto& dep : r.details->dependencies)
      if (dep.name.empty() || dep.version.empty()) v.push_back("dependency with empty name or version");
  }
  return v;
}

}  // namespace certpro
