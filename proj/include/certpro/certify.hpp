#pragma once

#include <string>
#include <vector>

#include "certpro/graph.hpp"
#include "certpro/types.hpp"

namespace certpro {

enum class BadgeLevel { Fragment, Partial, Full };  // FRAGMENT < PARTIAL < FULL

const char* badge_name(BadgeLevel b);
BadgeLevel badge_from_name(const std::string& name);

struct Finding {
  std::string severity;  // "error" | "warning"
  std::string node_id;
  std::string rule;
  std::string message;
};

struct CompletenessReport {
  std::vector<std::string> roots;
  BadgeLevel badge = BadgeLevel::Fragment;
  std::vector<Finding> findings;
  std::string assessed_at;
  std::string trace_digest;  // digest of the canonical exported trace document
};

Json to_json(const CompletenessReport& r);
CompletenessReport report_from_json(const Json& j);

struct Doi {
  std::string prefix;  // 10.<4-9 digits>
  std::string suffix;  // xxxx-xxxx from [a-z0-9]
  std::string render() const { return prefix + "/" + suffix; }
};

bool is_valid_doi_prefix(const std::string& prefix);
bool is_valid_doi_suffix(const std::string& suffix);

// Pluggable remote registration endpoint; one idempotent call per
// identifier. The core never requires a network.
class RemoteRegistrar {
 public:
  virtual ~RemoteRegistrar() = default;
  virtual void register_identifier(const std::string& identifier, const Json& metadata) = 0;
};

// Grades the ancestry of the roots. Errors (structural violations, missing
// or corrupt objects, unresolvable references) cap the badge at FRAGMENT;
// warnings (incomplete execution details, leaves not produced by an
// ingestion record) cap it at PARTIAL.
CompletenessReport assess_completeness(const Ledger& ledger, const ArtifactStore& store,
                                       const std::vector<std::string>& roots);

// Local-first identifier registry and certificate archive backed by
// certificates/registry.jsonl.
class Registrar {
 public:
  explicit Registrar(const Repo& repo, RemoteRegistrar* remote = nullptr);

  // Random [a-z0-9]{4}-[a-z0-9]{4} suffix, unique within the registry.
  Doi mint(const std::string& prefix);

  // Persists the certificate under its identifier; issuance is append-only
  // (re-issuing the same roots takes a fresh identifier).
  Json issue(const CompletenessReport& report, const Doi& doi, const std::string& issuer);

  Json load_certificate(const std::string& rendered_doi) const;

 private:
  fs::path certificate_path(const Doi& doi) const;
  void append_registry(const Json& event);
  void load_taken();

  Repo repo_;
  RemoteRegistrar* remote_;
  std::set<std::string> taken_;  // identifiers seen in the registry
  bool taken_loaded_ = false;
};

enum class CertVerifyOutcome { Valid, TraceChanged, StoreCorrupt };

// Re-exports the trace for the certificate's roots and re-verifies every
// object the trace references (including code and component refs).
CertVerifyOutcome verify_certificate(const Ledger& ledger, const ArtifactStore& store,
                                     const Json& certificate);

}  // namespace certpro
