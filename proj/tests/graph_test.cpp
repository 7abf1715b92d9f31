#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "certpro/errors.hpp"
#include "certpro/graph.hpp"
#include "test_support.hpp"

using namespace certpro;
using namespace certpro::testing;

namespace {

ProcessRecord make_step(const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs, const std::string& code_ref,
                        const std::string& tag = "step") {
  ProcessRecord rec;
  rec.transformation_type = tag;
  rec.inputs = inputs;
  rec.outputs = outputs;
  rec.agent = "test";
  rec.started_at = rec.finished_at = "2024-01-01T00:00:00Z";
  ExecutionDetails d;
  d.code_ref = code_ref;
  d.environment.os_name = "Linux";
  d.environment.os_version = "t";
  d.environment.architecture = "x86_64";
  rec.details = d;
  return rec;
}

ProcessRecord make_ingestion(const std::string& output) {
  ProcessRecord rec;
  rec.transformation_type = "ingestion";
  rec.outputs = {output};
  rec.agent = "test";
  rec.started_at = rec.finished_at = "2024-01-01T00:00:00Z";
  return rec;
}

}  // namespace

TEST_CASE("record appends and the ledger survives reopen") {
  TempRepo tr;
  std::string a = tr.store.put("raw", {}).digest;
  std::string b = tr.store.put("derived", {}).digest;
  std::string code = tr.store.put("code", {}).digest;

  tr.ledger.record(make_ingestion(a));
  std::string pid = tr.ledger.record(make_step({a}, {b}, code));
  CHECK(tr.ledger.size() == 2);
  CHECK(tr.ledger.process(pid).inputs == std::vector<std::string>{a});

  tr.reopen_ledger();
  CHECK(tr.ledger.size() == 2);
  CHECK(tr.ledger.has_process(pid));
}

TEST_CASE("process_id is a pure function of the record body; re-record is idempotent") {
  TempRepo tr;
  std::string a = tr.store.put("raw", {}).digest;
  ProcessRecord rec = make_ingestion(a);
  std::string id1 = tr.ledger.record(rec);
  std::string id2 = tr.ledger.record(rec);
  CHECK(id1 == id2);
  CHECK(tr.ledger.size() == 1);

  ProcessRecord other = make_ingestion(a);
  other.agent = "someone-else";
  CHECK(tr.ledger.record(other) != id1);  // different content, different record
}

TEST_CASE("dangling references are rejected") {
  TempRepo tr;
  std::string a = tr.store.put("raw", {}).digest;
  std::string code = tr.store.put("code", {}).digest;
  tr.ledger.record(make_ingestion(a));

  std::string phantom(64, '9');
  CHECK_THROWS_WITH_AS(tr.ledger.record(make_step({a}, {phantom}, code)),
                       doctest::Contains("DanglingReference"), Error);
  CHECK_THROWS_WITH_AS(tr.ledger.record(make_step({phantom}, {a}, code)),
                       doctest::Contains("DanglingReference"), Error);
  CHECK(tr.ledger.size() == 1);
}

TEST_CASE("a two-record cycle is rejected on the second record") {
  TempRepo tr;
  // x is known only through its stored bytes: the backward record is then a
  // pure cycle, not a producer conflict.
  std::string x = tr.store.put("x-bytes", {}).digest;
  std::string y = tr.store.put("y-bytes", {}).digest;
  std::string code = tr.store.put("code", {}).digest;

  tr.ledger.record(make_step({x}, {y}, code, "forward"));
  CHECK_THROWS_WITH_AS(tr.ledger.record(make_step({y}, {x}, code, "backward")),
                       doctest::Contains("CycleError"), Error);
}

TEST_CASE("duplicate producers are rejected, except repeated ingestion") {
  TempRepo tr;
  std::string a = tr.store.put("raw", {}).digest;
  std::string b = tr.store.put("derived", {}).digest;
  std::string c = tr.store.put("other-source", {}).digest;
  std::string code = tr.store.put("code", {}).digest;
  tr.ledger.record(make_ingestion(a));
  tr.ledger.record(make_ingestion(c));

  tr.ledger.record(make_step({a}, {b}, code));
  CHECK_THROWS_WITH_AS(tr.ledger.record(make_step({c}, {b}, code, "rival")),
                       doctest::Contains("DuplicateProducer"), Error);

  // Re-ingesting identical bytes is a second observation, not a conflict.
  ProcessRecord second = make_ingestion(a);
  second.agent = "again";
  CHECK_NOTHROW(tr.ledger.record(second));
}

TEST_CASE("field invariants are enforced") {
  TempRepo tr;
  std::string a = tr.store.put("raw", {}).digest;
  std::string code = tr.store.put("code", {}).digest;
  tr.ledger.record(make_ingestion(a));

  ProcessRecord bad_times = make_step({a}, {a}, code);
  bad_times.started_at = "2024-01-02T00:00:00Z";
  bad_times.finished_at = "2024-01-01T00:00:00Z";
  CHECK_THROWS_WITH_AS(tr.ledger.record(bad_times), doctest::Contains("ValidationError"), Error);

  ProcessRecord ingest_with_inputs = make_ingestion(a);
  ingest_with_inputs.inputs = {a};
  CHECK_THROWS_AS(tr.ledger.record(ingest_with_inputs), Error);

  ProcessRecord no_outputs = make_step({a}, {}, code);
  CHECK_THROWS_AS(tr.ledger.record(no_outputs), Error);
}

TEST_CASE("ancestry of a raw ingested artifact") {
  TempRepo tr;
  std::string a = tr.store.put("raw", {}).digest;
  tr.ledger.record(make_ingestion(a));

  TraceGraph g = tr.ledger.ancestry({a});
  CHECK(g.artifacts.size() == 1);
  CHECK(g.processes.size() == 1);
  CHECK(g.processes.begin()->second.inputs.empty());

  CHECK_THROWS_WITH_AS(tr.ledger.ancestry({std::string(64, 'f')}), doctest::Contains("NotFound"),
                       Error);
}

TEST_CASE("reference fixture has 6 artifacts and 6 processes") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  TraceGraph g = tr.ledger.ancestry({fx.plot_id});
  CHECK(g.artifacts.size() == 6);
  CHECK(g.processes.size() == 6);
  CHECK(validate_graph(g).empty());

  int ingestions = 0;
  for (const auto& [pid, p] : g.processes) ingestions += p.is_ingestion();
  CHECK(ingestions == 3);
}

TEST_CASE("shared ancestors appear exactly once") {
  TempRepo tr;
  std::string a = tr.store.put("shared-raw", {}).digest;
  std::string code = tr.store.put("code", {}).digest;
  tr.ledger.record(make_ingestion(a));
  std::string l = tr.store.put("left", {}).digest;
  std::string r = tr.store.put("right", {}).digest;
  tr.ledger.record(make_step({a}, {l}, code, "left"));
  tr.ledger.record(make_step({a}, {r}, code, "right"));

  TraceGraph g = tr.ledger.ancestry({l, r});
  CHECK(g.artifacts.count(a) == 1);
  CHECK(g.artifacts.size() == 3);
  CHECK(g.processes.size() == 3);
}

TEST_CASE("validate_graph flags a missing object as a closure violation") {
  TempRepo tr;
  Fixture fx = build_fixture(tr);
  fs::remove(tr.store.object_path(ArtifactId{fx.stats_id}));

  TraceGraph g = tr.ledger.ancestry({fx.plot_id});
  auto violations = validate_graph(g);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].rule == "closure");
  CHECK(violations[0].message.find(fx.stats_id) != std::string::npos);
}

TEST_CASE("empty graph is vacuously valid") {
  TraceGraph g;
  CHECK(validate_graph(g).empty());
  CHECK(topo_order(g).empty());
}

TEST_CASE("ancestry matches brute-force path enumeration on random DAGs") {
  for (uint64_t seed = 1; seed <= 12; ++seed) {
    TempRepo tr;
    RandomDag dag = build_random_dag(tr, seed, 20);
    std::string root = dag.artifact_ids.back();
    TraceGraph g = tr.ledger.ancestry({root});
    for (const auto& a : dag.artifact_ids) {
      bool expected = oracle_has_path(dag.processes, a, root);
      CHECK_MESSAGE(g.artifacts.count(a) == (expected ? 1u : 0u),
                    "seed ", seed, " artifact ", a);
    }
    CHECK(validate_graph(g).empty());
  }
}

TEST_CASE("random growth keeps the ledger acyclic and topologically orderable") {
  for (uint64_t seed = 50; seed < 56; ++seed) {
    TempRepo tr;
    RandomDag dag = build_random_dag(tr, seed, 25);
    TraceGraph g = tr.ledger.ancestry({dag.artifact_ids.back()});
    std::vector<std::string> order = topo_order(g);
    // every producer precedes its consumers
    std::map<std::string, size_t> rank;
    for (size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
    for (const auto& [pid, p] : g.processes) {
      for (const auto& in : p.inputs) {
        for (const auto& [qid, q] : g.processes) {
          bool produces = false;
          for (const auto& out : q.outputs) produces |= (out == in);
          if (produces) CHECK(rank.at(qid) < rank.at(pid));
        }
      }
    }
  }
}

TEST_CASE("append-only: recording never shrinks the ledger file") {
  TempRepo tr;
  std::string a = tr.store.put("raw", {}).digest;
  auto size_before = fs::file_size(tr.repo.ledger_file());
  tr.ledger.record(make_ingestion(a));
  auto size_after = fs::file_size(tr.repo.ledger_file());
  CHECK(size_after > size_before);

  // failed record leaves the file untouched
  std::string phantom(64, '9');
  std::string code = tr.store.put("code", {}).digest;
  CHECK_THROWS_AS(tr.ledger.record(make_step({a}, {phantom}, code)), Error);
  CHECK(fs::file_size(tr.repo.ledger_file()) == size_after);
}
