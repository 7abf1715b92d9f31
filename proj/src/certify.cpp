#include "certpro/certify.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "certpro/digest.hpp"
#include "certpro/errors.hpp"
#include "certpro/interchange.hpp"
#include "certpro/timeutil.hpp"

namespace certpro {

namespace {

std::vector<std::string> details_references(const ExecutionDetails& d) {
  std::vector<std::string> refs;
  if (d.code_ref) refs.push_back(*d.code_ref);
  if (d.config_ref) refs.push_back(*d.config_ref);
  refs.insert(refs.end(), d.data_dependencies.begin(), d.data_dependencies.end());
  refs.insert(refs.end(), d.additional_components.begin(), d.additional_components.end());
  return refs;
}

void sort_findings(std::vector<Finding>& findings) {
  std::sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
    return std::tie(a.severity, a.rule, a.node_id, a.message) <
           std::tie(b.severity, b.rule, b.node_id, b.message);
  });
}

}  // namespace

const char* badge_name(BadgeLevel b) {
  switch (b) {
    case BadgeLevel::Full: return "FULL";
    case BadgeLevel::Partial: return "PARTIAL";
    case BadgeLevel::Fragment: return "FRAGMENT";
  }
  return "FRAGMENT";
}

BadgeLevel badge_from_name(const std::string& name) {
  if (name == "FULL") return BadgeLevel::Full;
  if (name == "PARTIAL") return BadgeLevel::Partial;
  if (name == "FRAGMENT") return BadgeLevel::Fragment;
  fail(Errc::Schema, "unknown badge level '" + name + "'");
}

Json to_json(const CompletenessReport& r) {
  Json findings = Json::array();
  for (const auto& f : r.findings)
    findings.push_back(Json{{"message", f.message},
                            {"node_id", f.node_id},
                            {"rule", f.rule},
                            {"severity", f.severity}});
  std::vector<std::string> roots = r.roots;
  std::sort(roots.begin(), roots.end());
  return Json{{"assessed_at", r.assessed_at},
              {"badge", badge_name(r.badge)},
              {"findings", findings},
              {"roots", roots},
              {"trace_digest", r.trace_digest}};
}

CompletenessReport report_from_json(const Json& j) {
  CompletenessReport r;
  r.assessed_at = j.at("assessed_at").get<std::string>();
  r.badge = badge_from_name(j.at("badge").get<std::string>());
  for (const Json& f : j.at("findings"))
    r.findings.push_back({f.at("severity").get<std::string>(), f.at("node_id").get<std::string>(),
                          f.at("rule").get<std::string>(), f.at("message").get<std::string>()});
  for (const Json& root : j.at("roots")) r.roots.push_back(root.get<std::string>());
  r.trace_digest = j.at("trace_digest").get<std::string>();
  return r;
}

bool is_valid_doi_prefix(const std::string& prefix) {
  if (prefix.rfind("10.", 0) != 0) return false;
  std::string digits = prefix.substr(3);
  if (digits.size() < 4 || digits.size() > 9) return false;
  return std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_valid_doi_suffix(const std::string& suffix) {
  if (suffix.size() != 9 || suffix[4] != '-') return false;
  auto ok = [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); };
  for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 7u, 8u})
    if (!ok(suffix[i])) return false;
  return true;
}

CompletenessReport assess_completeness(const Ledger& ledger, const ArtifactStore& store,
                                       const std::vector<std::string>& roots) {
  TraceGraph g = ledger.ancestry(roots);
  CompletenessReport report;
  report.roots = g.roots;
  report.assessed_at = now_rfc3339();
  report.trace_digest = sha256_hex(canonical_dump(trace_document(g)));

  for (const auto& v : validate_graph(g))
    report.findings.push_back({"error", v.node_id, v.rule, v.message});

  // Integrity of every object the trace references, execution-detail refs
  // included. Absent objects were already reported as closure errors.
  std::set<std::string> checked;
  auto check_object = [&](const std::string& id, const std::string& owner) {
    if (!checked.insert(id).second) return;
    switch (store.verify(ArtifactId{id})) {
      case VerifyResult::Ok:
        break;
      case VerifyResult::Corrupt:
        report.findings.push_back(
            {"error", id, "integrity", "object " + id + " no longer matches its digest"});
        break;
      case VerifyResult::Missing:
        if (!g.missing_objects.count(id) && !g.missing_meta.count(id))
          report.findings.push_back(
              {"error", id, "closure", "object " + id + " referenced by " + owner + " is absent"});
        break;
    }
  };
  for (const auto& [id, a] : g.artifacts) check_object(id, "trace");
  for (const auto& [pid, p] : g.processes)
    if (p.details)
      for (const auto& ref : details_references(*p.details)) check_object(ref, pid);

  // Completeness of the recorded execution details, one finding per absent
  // category, and the raw-acquisition criterion for leaf artifacts.
  for (const auto& [pid, p] : g.processes) {
    if (p.is_ingestion()) continue;
    if (!p.details) {
      report.findings.push_back(
          {"warning", pid, "details", "process records no execution details"});
      continue;
    }
    if (!p.details->code_ref)
      report.findings.push_back(
          {"warning", pid, "code-config", "process records no code reference"});
    if (p.details->dependencies.empty())
      report.findings.push_back(
          {"warning", pid, "dependencies", "process records no dependent libraries"});
    if (p.details->environment.os_name.empty() || p.details->environment.architecture.empty())
      report.findings.push_back(
          {"warning", pid, "environment", "process records an incomplete runtime environment"});
  }
  {
    std::set<std::string> produced;
    for (const auto& [pid, p] : g.processes)
      for (const auto& out : p.outputs) produced.insert(out);
    for (const auto& [id, a] : g.artifacts)
      if (!produced.count(id))
        report.findings.push_back({"warning", id, "raw-acquisition",
                                   "artifact " + id + " is not traced back to an ingestion record"});
  }

  sort_findings(report.findings);
  bool any_error = false, any_warning = false;
  for (const auto& f : report.findings) (f.severity == "error" ? any_error : any_warning) = true;
  report.badge =
      any_error ? BadgeLevel::Fragment : (any_warning ? BadgeLevel::Partial : BadgeLevel::Full);
  return report;
}

Registrar::Registrar(const Repo& repo, RemoteRegistrar* remote) : repo_(repo), remote_(remote) {}

fs::path Registrar::certificate_path(const Doi& doi) const {
  return repo_.certificates_dir() / (doi.prefix + "__" + doi.suffix + ".json");
}

void Registrar::append_registry(const Json& event) {
  RepoLock lock(repo_);
  std::ofstream f(repo_.registry_file(), std::ios::app);
  if (!f) fail(Errc::Registrar, "cannot open registry at " + repo_.registry_file().string());
  f << canonical_dump(event) << "\n";
  f.flush();
  if (!f) fail(Errc::Registrar, "registry append failed");
}

void Registrar::load_taken() {
  if (taken_loaded_) return;
  taken_loaded_ = true;
  if (!fs::exists(repo_.registry_file())) return;
  std::ifstream f(repo_.registry_file());
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.contains("doi")) taken_.insert(j["doi"].get<std::string>());
  }
}

Doi Registrar::mint(const std::string& prefix) {
  if (!is_valid_doi_prefix(prefix))
    fail(Errc::Format, "prefix '" + prefix + "' does not match 10.<4-9 digits>");
  load_taken();

  static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  static std::mt19937_64 rng{std::random_device{}()};
  std::uniform_int_distribution<int> pick(0, 35);
  Doi doi;
  doi.prefix = prefix;
  for (int attempts = 0; attempts < 1000; ++attempts) {
    std::string s;
    for (int i = 0; i < 8; ++i) s.push_back(alphabet[pick(rng)]);
    s.insert(4, 1, '-');
    doi.suffix = s;
    if (taken_.insert(doi.render()).second) {
      append_registry(Json{{"doi", doi.render()}, {"event", "mint"}, {"minted_at", now_rfc3339()}});
      return doi;
    }
  }
  fail(Errc::Registrar, "could not find a free suffix under " + prefix);
}

Json Registrar::issue(const CompletenessReport& report, const Doi& doi,
                      const std::string& issuer) {
  if (report.badge == BadgeLevel::Fragment)
    fail(Errc::Uncertifiable, "FRAGMENT traces cannot receive a certificate");
  if (!is_valid_doi_prefix(doi.prefix) || !is_valid_doi_suffix(doi.suffix))
    fail(Errc::Format, "malformed identifier '" + doi.render() + "'");

  std::vector<std::string> roots = report.roots;
  std::sort(roots.begin(), roots.end());
  Json cert{{"badge", badge_name(report.badge)},
            {"doi", Json{{"prefix", doi.prefix}, {"suffix", doi.suffix}}},
            {"issued_at", now_rfc3339()},
            {"issuer", issuer},
            {"report", to_json(report)},
            {"roots", roots},
            {"trace_digest", report.trace_digest}};
  atomic_write_file(certificate_path(doi), canonical_dump(cert));
  append_registry(
      Json{{"doi", doi.render()}, {"event", "issue"}, {"issued_at", cert["issued_at"]}});
  if (remote_) remote_->register_identifier(doi.render(), cert);
  return cert;
}

Json Registrar::load_certificate(const std::string& rendered_doi) const {
  auto slash = rendered_doi.find('/');
  if (slash == std::string::npos) fail(Errc::Format, "malformed identifier '" + rendered_doi + "'");
  Doi doi{rendered_doi.substr(0, slash), rendered_doi.substr(slash + 1)};
  fs::path path = certificate_path(doi);
  if (!fs::exists(path)) fail(Errc::NotFound, "no certificate for " + rendered_doi);
  Json cert = Json::parse(read_file(path), nullptr, false);
  if (cert.is_discarded()) fail(Errc::Registrar, "unreadable certificate at " + path.string());
  return cert;
}

CertVerifyOutcome verify_certificate(const Ledger& ledger, const ArtifactStore& store,
                                     const Json& certificate) {
  std::vector<std::string> roots;
  for (const Json& r : certificate.at("roots")) roots.push_back(r.get<std::string>());

  TraceGraph g = ledger.ancestry(roots);
  std::string current_digest = sha256_hex(canonical_dump(trace_document(g)));
  if (current_digest != certificate.at("trace_digest").get<std::string>())
    return CertVerifyOutcome::TraceChanged;

  std::set<std::string> refs;
  for (const auto& [id, a] : g.artifacts) refs.insert(id);
  for (const auto& [pid, p] : g.processes)
    if (p.details)
      for (const auto& ref : details_references(*p.details)) refs.insert(ref);
  for (const auto& id : refs)
    if (store.verify(ArtifactId{id}) != VerifyResult::Ok) return CertVerifyOutcome::StoreCorrupt;
  return CertVerifyOutcome::Valid;
}

}  // namespace certpro
