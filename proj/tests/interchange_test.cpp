#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "certpro/certify.hpp"
#include "certpro/errors.hpp"
#include "certpro/interchange.hpp"
#include "test_support.hpp"

using namespace certpro;
using namespace certpro::testing;

namespace {

// Minimal well-formed trace document built by hand (one ingestion, one step).
Json tiny_doc(TempRepo& tr) {
  std::string raw = tr.store.put("raw bytes", {}).digest;
  std::string out = tr.store.put("derived bytes", {}).digest;
  std::string code = tr.store.put("code bytes", {}).digest;

  ProcessRecord ingest;
  ingest.transformation_type = "ingestion";
  ingest.outputs = {raw};
  ingest.agent = "t";
  ingest.started_at = ingest.finished_at = "2024-01-01T00:00:00Z";
  ingest.process_id = compute_process_id(ingest);

  ProcessRecord step;
  step.transformation_type = "step";
  step.inputs = {raw};
  step.outputs = {out};
  step.agent = "t";
  step.started_at = step.finished_at = "2024-01-01T00:00:01Z";
  ExecutionDetails d;
  d.code_ref = code;
  d.environment.os_name = "Linux";
  d.environment.os_version = "t";
  d.environment.architecture = "x86_64";
  step.details = d;
  step.process_id = compute_process_id(step);

  TraceGraph g;
  g.artifacts.emplace(raw, Artifact{ArtifactId{raw}, {}, {}});
  g.artifacts.emplace(out, Artifact{ArtifactId{out}, {}, {}});
  g.processes.emplace(ingest.process_id, ingest);
  g.processes.emplace(step.process_id, step);
  g.roots = {out};
  return trace_document(g);
}

}  // namespace

TEST_CASE("export -> import -> export is byte identical") {
  TempRepo src;
  Fixture fx = build_fixture(src);
  TempDir bundle;
  std::string doc = export_trace(src.ledger, src.store, {fx.plot_id}, bundle.path());

  TempRepo dst;
  TraceGraph imported = import_trace(dst.store, dst.ledger, doc, bundle.path());
  CHECK(imported.artifacts.size() == 6);
  CHECK(imported.processes.size() == 6);
  CHECK(dst.store.get(ArtifactId{fx.plot_id}) == src.store.get(ArtifactId{fx.plot_id}));

  std::string round = export_trace(dst.ledger, dst.store, {fx.plot_id});
  CHECK(round == doc);

  // importing the same document again changes nothing
  size_t before = dst.ledger.size();
  import_trace(dst.store, dst.ledger, doc, bundle.path());
  CHECK(dst.ledger.size() == before);

  // the imported trace certifies exactly like the original
  CompletenessReport a = assess_completeness(src.ledger, src.store, {fx.plot_id});
  CompletenessReport b = assess_completeness(dst.ledger, dst.store, {fx.plot_id});
  CHECK(a.trace_digest == b.trace_digest);
  CHECK(a.badge == b.badge);
}

TEST_CASE("metadata-only import round trips without object bytes") {
  TempRepo src;
  Fixture fx = build_fixture(src);
  std::string doc = export_trace(src.ledger, src.store, {fx.plot_id});

  TempRepo dst;
  import_trace(dst.store, dst.ledger, doc);
  CHECK(export_trace(dst.ledger, dst.store, {fx.plot_id}) == doc);
  CHECK(dst.store.verify(ArtifactId{fx.plot_id}) == VerifyResult::Missing);
}

TEST_CASE("export is deterministic and independent of recording order") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  std::string a = export_trace(tr.ledger, tr.store, {fx.plot_id});
  std::string b = export_trace(tr.ledger, tr.store, {fx.plot_id});
  CHECK(a == b);
  bool compact = Json::parse(a).dump() == a;
  CHECK(compact);  // canonical: no insignificant whitespace
  CHECK(Json::parse(a)["format_version"] == "1");
}

TEST_CASE("bundling a damaged store is refused") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  fs::remove(tr.store.object_path(ArtifactId{fx.stats_id}));
  TempDir bundle;
  CHECK_THROWS_WITH_AS(export_trace(tr.ledger, tr.store, {fx.plot_id}, bundle.path()),
                       doctest::Contains(fx.stats_id.c_str()), Error);
  // metadata-only export still works; the graph itself is intact
  CHECK_NOTHROW(export_trace(tr.ledger, tr.store, {fx.plot_id}));
}

TEST_CASE("schema violations name the offending field") {
  TempRepo tr;
  Json doc = tiny_doc(tr);

  for (const char* key : {"artifacts", "format_version", "missing", "processes", "roots"}) {
    Json broken = doc;
    broken.erase(key);
    CHECK_THROWS_WITH_AS(validate_trace_schema(broken), doctest::Contains(key), Error);
  }
  {
    Json broken = doc;
    broken["format_version"] = "2";
    CHECK_THROWS_WITH_AS(validate_trace_schema(broken), doctest::Contains("format_version"), Error);
  }
  for (const char* key : {"agent", "finished_at", "inputs", "outputs", "process_id",
                          "started_at", "transformation_type"}) {
    Json broken = doc;
    broken["processes"][0].erase(key);
    CHECK_THROWS_WITH_AS(validate_trace_schema(broken), doctest::Contains(key), Error);
  }
  {
    Json broken = doc;
    broken["artifacts"][0].erase("id");
    CHECK_THROWS_WITH_AS(validate_trace_schema(broken), doctest::Contains("id"), Error);
  }

  TempRepo dst;
  CHECK_THROWS_WITH_AS(import_trace(dst.store, dst.ledger, "not json at all"),
                       doctest::Contains("SchemaError"), Error);
}

TEST_CASE("non-canonical bytes are rejected on import") {
  TempRepo tr;
  Json doc = tiny_doc(tr);
  TempRepo dst;
  CHECK_THROWS_WITH_AS(import_trace(dst.store, dst.ledger, doc.dump(2)),
                       doctest::Contains("CanonicalFormError"), Error);
  CHECK_THROWS_AS(import_trace(dst.store, dst.ledger, canonical_dump(doc) + "\n"), Error);
  CHECK_NOTHROW(import_trace(dst.store, dst.ledger, canonical_dump(doc)));
}

TEST_CASE("structurally invalid documents are rejected before any write") {
  TempRepo tr;
  Json doc = tiny_doc(tr);

  // the processes array is sorted by process_id, so locate the step by type
  auto step_index = [](const Json& d) {
    for (size_t i = 0; i < d["processes"].size(); ++i)
      if (d["processes"][i]["transformation_type"] == "step") return i;
    throw std::logic_error("no step process");
  };

  SUBCASE("undefined reference") {
    Json broken = doc;
    size_t i = step_index(broken);
    broken["processes"][i]["inputs"].push_back(std::string(64, 'd'));
    broken["processes"][i]["process_id"] =
        compute_process_id(process_from_json(broken["processes"][i], "p"));
    TempRepo dst;
    CHECK_THROWS_WITH_AS(import_trace(dst.store, dst.ledger, canonical_dump(broken)),
                         doctest::Contains("ValidationError"), Error);
    CHECK(dst.ledger.size() == 0);
  }

  SUBCASE("declared-missing reference is tolerated") {
    Json broken = doc;
    std::string ghost(64, 'd');
    size_t i = step_index(broken);
    broken["processes"][i]["inputs"].push_back(ghost);
    broken["processes"][i]["process_id"] =
        compute_process_id(process_from_json(broken["processes"][i], "p"));
    broken["missing"].push_back(ghost);
    TempRepo dst;
    TraceGraph g = import_trace(dst.store, dst.ledger, canonical_dump(broken));
    CHECK(g.missing_meta.count(ghost) == 1);
    CHECK(dst.ledger.size() == 2);
  }

  SUBCASE("cycle") {
    // b -> c and c -> b
    std::string b = tr.store.put("bb", {}).digest;
    std::string c = tr.store.put("cc", {}).digest;
    TraceGraph g;
    g.artifacts.emplace(b, Artifact{ArtifactId{b}, {}, {}});
    g.artifacts.emplace(c, Artifact{ArtifactId{c}, {}, {}});
    for (auto [in, out] : {std::pair{b, c}, std::pair{c, b}}) {
      ProcessRecord rec;
      rec.transformation_type = "loop";
      rec.inputs = {in};
      rec.outputs = {out};
      rec.agent = "t";
      rec.started_at = rec.finished_at = "2024-01-01T00:00:00Z";
      ExecutionDetails d;
      d.code_ref = tr.store.put("code bytes", {}).digest;
      d.environment.os_name = "Linux";
      d.environment.os_version = "t";
      d.environment.architecture = "x86_64";
      rec.details = d;
      rec.process_id = compute_process_id(rec);
      g.processes.emplace(rec.process_id, rec);
    }
    g.roots = {b};
    TempRepo dst;
    CHECK_THROWS_WITH_AS(import_trace(dst.store, dst.ledger, canonical_dump(trace_document(g))),
                         doctest::Contains("CycleError"), Error);
  }
}

TEST_CASE("a corrupt bundle object is rejected by digest") {
  TempRepo src;
  Fixture fx = build_fixture(src);
  TempDir bundle;
  std::string doc = export_trace(src.ledger, src.store, {fx.plot_id}, bundle.path());

  std::string bytes = read_file(bundle.path() / fx.combined_id);
  bytes[0] ^= 0x01;
  { std::ofstream(bundle.path() / fx.combined_id, std::ios::binary) << bytes; }

  TempRepo dst;
  CHECK_THROWS_WITH_AS(import_trace(dst.store, dst.ledger, doc, bundle.path()),
                       doctest::Contains("IntegrityError"), Error);
}

TEST_CASE("DOT rendering shows every node and edge") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  TraceGraph g = tr.ledger.ancestry({fx.plot_id});
  std::string dot = render_dot(g);

  auto count = [&](const std::string& needle) {
    size_t n = 0, pos = 0;
    while ((pos = dot.find(needle, pos)) != std::string::npos) ++n, pos += needle.size();
    return n;
  };
  CHECK(count("shape=box") == 6);
  CHECK(count("shape=ellipse") == 6);
  CHECK(count("\" -> \"") == 11);  // 5 input edges + 6 output edges
  CHECK(dot.find(fx.plot_id.substr(0, 8)) != std::string::npos);
  CHECK(dot.find("gating") != std::string::npos);
  CHECK(render_dot(g) == dot);  // deterministic
}

TEST_CASE("the HTML report is complete and self-contained") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  CompletenessReport report = assess_completeness(tr.ledger, tr.store, {fx.plot_id});
  Registrar reg(tr.repo);
  Doi doi = reg.mint("10.57785");
  Json cert = reg.issue(report, doi, "unit-test");
  TraceGraph g = tr.ledger.ancestry({fx.plot_id});

  std::string html = render_report(cert, g);
  CHECK(html.find("<!DOCTYPE html>") == 0);
  CHECK(html.find(doi.render()) != std::string::npos);
  CHECK(html.find("FULL") != std::string::npos);
  CHECK(html.find(report.trace_digest) != std::string::npos);
  CHECK(html.find("digraph trace") != std::string::npos);
  CHECK(html.find("http://") == std::string::npos);   // offline by construction
  CHECK(html.find("https://") == std::string::npos);
  CHECK(html.find("-&gt; ") != std::string::npos);    // embedded DOT is escaped

  Json bad = cert;
  bad["roots"] = Json::array({std::string(64, '1')});
  CHECK_THROWS_AS(render_report(bad, g), Error);
}
