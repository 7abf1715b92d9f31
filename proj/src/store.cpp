#include "certpro/store.hpp"

#include <algorithm>
#include <cctype>

#include "certpro/digest.hpp"
#include "certpro/errors.hpp"
#include "certpro/timeutil.hpp"

namespace certpro {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::map<std::string, std::string> normalize_keys(const std::map<std::string, std::string>& m,
                                                  const std::string& what) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : m) {
    if (k.empty()) fail(Errc::Validation, what + " map key empty");
    out[lower(k)] = v;
  }
  return out;
}

// First non-empty value wins; a different non-empty value is a conflict.
void merge_descriptive(std::string& existing, const std::string& incoming, const char* name,
                       const std::string& digest) {
  if (incoming.empty()) return;
  if (existing.empty()) {
    existing = incoming;
    return;
  }
  if (existing != incoming)
    fail(Errc::MetaConflict,
         std::string(name) + " for " + digest + " already recorded as '" + existing + "'");
}

}  // namespace

ArtifactStore::ArtifactStore(const Repo& repo) : repo_(repo) {}

fs::path ArtifactStore::object_path(const ArtifactId& id) const {
  return repo_.objects_dir() / id.digest.substr(0, 2) / id.digest.substr(2);
}

fs::path ArtifactStore::meta_path(const ArtifactId& id) const {
  return repo_.meta_dir() / (id.digest + ".json");
}

bool ArtifactStore::has_object(const ArtifactId& id) const { return fs::exists(object_path(id)); }

bool ArtifactStore::has_meta(const ArtifactId& id) const { return fs::exists(meta_path(id)); }

std::size_t ArtifactStore::object_count() const {
  std::size_t n = 0;
  for (const auto& entry : fs::recursive_directory_iterator(repo_.objects_dir()))
    if (entry.is_regular_file()) ++n;
  return n;
}

void ArtifactStore::write_object(const ArtifactId& id, const std::string& bytes) {
  fs::path path = object_path(id);
  if (fs::exists(path)) return;  // idempotent by content addressing
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) fail(Errc::Storage, "cannot create object shard: " + ec.message());
  atomic_write_file(path, bytes);
}

ArtifactId ArtifactStore::put(const std::string& bytes, ArtifactMeta meta,
                              const std::vector<SubjectMetadata>& subjects) {
  if (bytes.size() > max_object_bytes_)
    fail(Errc::Storage, "object exceeds size cap (" + std::to_string(bytes.size()) + " bytes)");
  if (meta.byte_size != 0 && meta.byte_size != bytes.size())
    fail(Errc::MetaConflict, "declared byte_size does not match object length");

  ArtifactId id{sha256_hex(bytes)};
  write_object(id, bytes);

  meta.byte_size = bytes.size();
  meta.storage_ref = "objects/" + id.digest.substr(0, 2) + "/" + id.digest.substr(2);
  if (meta.created_at.empty()) meta.created_at = now_rfc3339();

  Artifact record;
  if (has_meta(id)) {
    record = stat(id);
    if (record.meta.byte_size != bytes.size())
      fail(Errc::MetaConflict, "byte_size for " + id.digest + " contradicts stored object");
    merge_descriptive(record.meta.data_format, meta.data_format, "data_format", id.digest);
    merge_descriptive(record.meta.file_type, meta.file_type, "file_type", id.digest);
    merge_descriptive(record.meta.modality, meta.modality, "modality", id.digest);
    for (const auto& [k, v] : meta.labels) record.meta.labels.emplace(k, v);
  } else {
    record.id = id;
    record.meta = std::move(meta);
  }

  const std::string stamp = now_rfc3339();
  for (SubjectMetadata s : subjects) {
    if (s.subject_id.empty()) fail(Errc::Validation, "subject record with empty subject_id");
    s.demographics = normalize_keys(s.demographics, "demographics");
    s.collection = normalize_keys(s.collection, "collection");
    if (s.recorded_at.empty()) s.recorded_at = stamp;
    record.subjects.push_back(std::move(s));
  }

  atomic_write_file(meta_path(id), canonical_dump(to_json(record)));
  return id;
}

std::string ArtifactStore::get(const ArtifactId& id) const {
  if (!is_hex_digest(id.digest)) fail(Errc::NotFound, "malformed digest '" + id.digest + "'");
  fs::path path = object_path(id);
  if (!fs::exists(path)) fail(Errc::NotFound, "no object " + id.digest);
  std::string bytes = read_file(path);
  if (sha256_hex(bytes) != id.digest)
    fail(Errc::Integrity, "stored bytes no longer match digest " + id.digest);
  return bytes;
}

VerifyResult ArtifactStore::verify(const ArtifactId& id) const {
  fs::path path = object_path(id);
  if (!fs::exists(path)) return VerifyResult::Missing;
  return sha256_file(path) == id.digest ? VerifyResult::Ok : VerifyResult::Corrupt;
}

Artifact ArtifactStore::stat(const ArtifactId& id) const {
  if (!has_meta(id)) fail(Errc::NotFound, "no artifact " + id.digest);
  Json doc = Json::parse(read_file(meta_path(id)), nullptr, false);
  if (doc.is_discarded()) fail(Errc::Storage, "unreadable metadata for " + id.digest);
  return artifact_from_json(doc, "artifact " + id.digest);
}

void ArtifactStore::put_object_with_document(const std::string& bytes, const Json& artifact_doc) {
  Artifact a = artifact_from_json(artifact_doc, "artifact");
  if (sha256_hex(bytes) != a.id.digest)
    fail(Errc::Integrity, "bundle object does not match digest " + a.id.digest);
  write_object(a.id, bytes);
  if (!has_meta(a.id)) atomic_write_file(meta_path(a.id), canonical_dump(artifact_doc));
}

void ArtifactStore::put_document(const Json& artifact_doc) {
  Artifact a = artifact_from_json(artifact_doc, "artifact");
  if (!has_meta(a.id)) atomic_write_file(meta_path(a.id), canonical_dump(artifact_doc));
}

}  // namespace certpro
