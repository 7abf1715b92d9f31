#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "certpro/certify.hpp"
#include "certpro/digest.hpp"
#include "certpro/errors.hpp"
#include "test_support.hpp"

using namespace certpro;
using namespace certpro::testing;

namespace {

struct RecordingRemote : RemoteRegistrar {
  std::vector<std::string> calls;
  void register_identifier(const std::string& identifier, const Json&) override {
    calls.push_back(identifier);
  }
};

int count_rule(const CompletenessReport& r, const std::string& rule) {
  int n = 0;
  for (const auto& f : r.findings) n += (f.rule == rule);
  return n;
}

}  // namespace

TEST_CASE("badge names round trip") {
  CHECK(badge_name(BadgeLevel::Full) == std::string("FULL"));
  CHECK(badge_from_name("PARTIAL") == BadgeLevel::Partial);
  CHECK(badge_from_name("FRAGMENT") == BadgeLevel::Fragment);
  CHECK_THROWS_AS(badge_from_name("GOLD"), Error);
}

TEST_CASE("identifier shape validators") {
  CHECK(is_valid_doi_prefix("10.57785"));
  CHECK(is_valid_doi_prefix("10.1234"));
  CHECK(is_valid_doi_prefix("10.123456789"));
  CHECK(!is_valid_doi_prefix("10.123"));        // too few digits
  CHECK(!is_valid_doi_prefix("10.1234567890"));  // too many
  CHECK(!is_valid_doi_prefix("11.57785"));
  CHECK(!is_valid_doi_prefix("doi:10.5"));

  CHECK(is_valid_doi_suffix("96bw-7571"));
  CHECK(!is_valid_doi_suffix("96BW-7571"));  // uppercase
  CHECK(!is_valid_doi_suffix("96bw7571"));
  CHECK(!is_valid_doi_suffix("96bw-757"));
  CHECK(!is_valid_doi_suffix("96b_-7571"));
}

TEST_CASE("complete pipeline earns FULL with no findings") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  CompletenessReport r = assess_completeness(tr.ledger, tr.store, {fx.plot_id});
  CHECK(r.badge == BadgeLevel::Full);
  CHECK(r.findings.empty());
  CHECK(is_hex_digest(r.trace_digest));

  // assessment is read-only and stable
  CompletenessReport again = assess_completeness(tr.ledger, tr.store, {fx.plot_id});
  CHECK(again.trace_digest == r.trace_digest);
  CHECK(again.badge == BadgeLevel::Full);
}

TEST_CASE("missing dependency manifests downgrade to PARTIAL") {
  TempRepo tr;
  Fixture fx = build_fixture(tr, /*with_manifest=*/false);
  CompletenessReport r = assess_completeness(tr.ledger, tr.store, {fx.plot_id});
  CHECK(r.badge == BadgeLevel::Partial);
  CHECK(count_rule(r, "dependencies") == 3);  // one per executed step
  for (const auto& f : r.findings) CHECK(f.severity == "warning");
}

TEST_CASE("a damaged store downgrades to FRAGMENT; repair restores FULL") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  std::string stats_bytes = tr.store.get(ArtifactId{fx.stats_id});
  fs::remove(tr.store.object_path(ArtifactId{fx.stats_id}));

  CompletenessReport broken = assess_completeness(tr.ledger, tr.store, {fx.plot_id});
  CHECK(broken.badge == BadgeLevel::Fragment);
  CHECK(count_rule(broken, "closure") >= 1);

  tr.store.put(stats_bytes, {});
  CompletenessReport repaired = assess_completeness(tr.ledger, tr.store, {fx.plot_id});
  CHECK(repaired.badge == BadgeLevel::Full);
  CHECK(repaired.trace_digest == broken.trace_digest);  // graph itself never changed
}

TEST_CASE("a corrupt code archive is an error, not a warning") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  std::string code_ref = *tr.ledger.process(fx.gating_pid).details->code_ref;
  fs::path p = tr.store.object_path(ArtifactId{code_ref});
  std::string bytes = read_file(p);
  bytes[0] ^= 0x01;
  { std::ofstream(p, std::ios::binary) << bytes; }

  CompletenessReport r = assess_completeness(tr.ledger, tr.store, {fx.plot_id});
  CHECK(r.badge == BadgeLevel::Fragment);
  CHECK(count_rule(r, "integrity") == 1);
}

TEST_CASE("report serialization round trips") {
  TempRepo tr;
  Fixture fx = build_fixture(tr, false);
  CompletenessReport r = assess_completeness(tr.ledger, tr.store, {fx.plot_id});
  CompletenessReport back = report_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
}

TEST_CASE("mint produces well-formed unique identifiers that persist") {
  TempRepo tr;
  Registrar reg(tr.repo);
  std::set<std::string> seen;
  for (int i = 0; i < 200; ++i) {
    Doi doi = reg.mint("10.57785");
    CHECK(doi.prefix == "10.57785");
    CHECK(is_valid_doi_suffix(doi.suffix));
    CHECK(seen.insert(doi.render()).second);
  }

  // a fresh registrar over the same repository sees prior mints
  Registrar reg2(tr.repo);
  for (int i = 0; i < 200; ++i) CHECK(seen.insert(reg2.mint("10.57785").render()).second);

  CHECK_THROWS_WITH_AS(reg.mint("doi:10.5"), doctest::Contains("FormatError"), Error);
  CHECK_THROWS_AS(reg.mint("10.1"), Error);
}

TEST_CASE("issue persists a certificate and notifies the remote registrar") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  CompletenessReport report = assess_completeness(tr.ledger, tr.store, {fx.plot_id});

  RecordingRemote remote;
  Registrar reg(tr.repo, &remote);
  Doi doi = reg.mint("10.57785");
  Json cert = reg.issue(report, doi, "unit-test");

  CHECK(cert["badge"] == "FULL");
  CHECK(cert["trace_digest"] == report.trace_digest);
  CHECK(cert["issuer"] == "unit-test");
  CHECK(cert["roots"] == Json::array({fx.plot_id}));
  REQUIRE(remote.calls.size() == 1);
  CHECK(remote.calls[0] == doi.render());

  Json loaded = reg.load_certificate(doi.render());
  CHECK(loaded == cert);
  CHECK_THROWS_AS(reg.load_certificate("10.57785/zzzz-zzzz"), Error);
  CHECK_THROWS_AS(reg.load_certificate("not-a-doi"), Error);

  // re-issuing the same trace takes a fresh identifier, same trace digest
  Doi doi2 = reg.mint("10.57785");
  Json cert2 = reg.issue(report, doi2, "unit-test");
  CHECK(doi2.render() != doi.render());
  CHECK(cert2["trace_digest"] == cert["trace_digest"]);
}

TEST_CASE("FRAGMENT traces are uncertifiable and malformed identifiers rejected") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  fs::remove(tr.store.object_path(ArtifactId{fx.combined_id}));
  CompletenessReport report = assess_completeness(tr.ledger, tr.store, {fx.plot_id});
  REQUIRE(report.badge == BadgeLevel::Fragment);

  Registrar reg(tr.repo);
  Doi doi = reg.mint("10.57785");
  CHECK_THROWS_WITH_AS(reg.issue(report, doi, "unit-test"), doctest::Contains("Uncertifiable"),
                       Error);

  report.badge = BadgeLevel::Full;  // force past the gate to hit the doi check
  CHECK_THROWS_WITH_AS(reg.issue(report, Doi{"10.57785", "UPPER-CAS"}, "unit-test"),
                       doctest::Contains("FormatError"), Error);
}

TEST_CASE("verify_certificate distinguishes valid, changed and corrupt") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  CompletenessReport report = assess_completeness(tr.ledger, tr.store, {fx.plot_id});
  Registrar reg(tr.repo);
  Json cert = reg.issue(report, reg.mint("10.57785"), "unit-test");

  CHECK(verify_certificate(tr.ledger, tr.store, cert) == CertVerifyOutcome::Valid);

  SUBCASE("tampered object bytes") {
    fs::path p = tr.store.object_path(ArtifactId{fx.stats_id});
    std::string bytes = read_file(p);
    bytes[2] ^= 0x01;
    { std::ofstream(p, std::ios::binary) << bytes; }
    CHECK(verify_certificate(tr.ledger, tr.store, cert) == CertVerifyOutcome::StoreCorrupt);
  }

  SUBCASE("deleted object keeps the trace digest but fails verification") {
    fs::remove(tr.store.object_path(ArtifactId{fx.combined_id}));
    CHECK(verify_certificate(tr.ledger, tr.store, cert) == CertVerifyOutcome::StoreCorrupt);
  }

  SUBCASE("new record inside the ancestry changes the trace") {
    ProcessRecord extra;
    extra.transformation_type = "ingestion";
    extra.outputs = {fx.raw_ids[0]};
    extra.agent = "late-observer";
    extra.started_at = extra.finished_at = "2024-06-01T00:00:00Z";
    tr.ledger.record(extra);
    CHECK(verify_certificate(tr.ledger, tr.store, cert) == CertVerifyOutcome::TraceChanged);
  }
}
