#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "certpro/repo.hpp"
#include "certpro/types.hpp"

namespace certpro {

enum class VerifyResult { Ok, Corrupt, Missing };

// Content-addressed immutable object store. Identity is the SHA-256 of the
// object bytes; any modification yields a new object. Writes are atomic
// (temp + rename under the digest path) and idempotent.
class ArtifactStore {
 public:
  explicit ArtifactStore(const Repo& repo);

  // Digest-bound fields are immutable; descriptive fields adopt the first
  // non-empty value and conflict otherwise; labels merge and subject records
  // append, each stamped with its ingestion event.
  ArtifactId put(const std::string& bytes, ArtifactMeta meta,
                 const std::vector<SubjectMetadata>& subjects = {});

  // Verify-on-read: the digest is recomputed before the bytes are returned.
  std::string get(const ArtifactId& id) const;

  VerifyResult verify(const ArtifactId& id) const;

  // Metadata and subject records only; object bytes are not read.
  Artifact stat(const ArtifactId& id) const;

  bool has_object(const ArtifactId& id) const;
  bool has_meta(const ArtifactId& id) const;
  std::size_t object_count() const;

  fs::path object_path(const ArtifactId& id) const;
  fs::path meta_path(const ArtifactId& id) const;

  // Raw object write used by trace import; the caller supplies the complete
  // artifact document verbatim so re-export stays byte-identical.
  void put_object_with_document(const std::string& bytes, const Json& artifact_doc);

  // Metadata-only import (no bundle); existing documents are left untouched.
  void put_document(const Json& artifact_doc);

  std::uint64_t max_object_bytes() const { return max_object_bytes_; }
  void set_max_object_bytes(std::uint64_t n) { max_object_bytes_ = n; }

 private:
  void write_object(const ArtifactId& id, const std::string& bytes);

  Repo repo_;
  std::uint64_t max_object_bytes_ = 1ull << 30;  // 1 GiB default cap
};

}  // namespace certpro
