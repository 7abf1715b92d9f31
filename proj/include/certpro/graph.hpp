#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "certpro/repo.hpp"
#include "certpro/store.hpp"
#include "certpro/types.hpp"

namespace certpro {

// Induced bipartite subgraph: artifact nodes keyed by digest, process nodes
// keyed by process_id, edges implied by each record's inputs/outputs.
struct TraceGraph {
  std::map<std::string, Artifact> artifacts;
  std::map<std::string, ProcessRecord> processes;
  std::vector<std::string> roots;
  std::set<std::string> missing_meta;     // referenced ids with no metadata document
  std::set<std::string> missing_objects;  // ids whose object file is absent
};

struct Violation {
  std::string rule;  // closure | acyclicity | single-producer | bipartite | record
  std::string node_id;
  std::string message;
};

// Append-only process ledger over ledger/log.jsonl, one canonical record per
// line, with an in-memory index rebuilt on open. A torn final line (crash
// during append) is ignored.
class Ledger {
 public:
  Ledger(const Repo& repo, const ArtifactStore& store);

  // Validates field invariants, reference closure, the single-producer rule
  // and acyclicity, then durably appends. Computes process_id from the
  // canonical record body; re-recording identical content is idempotent.
  // References in `assume_known` pass the closure check even without a
  // metadata document (imports of traces with declared-missing artifacts).
  std::string record(ProcessRecord r, const std::set<std::string>& assume_known = {});

  bool has_process(const std::string& process_id) const;
  const ProcessRecord& process(const std::string& process_id) const;
  const std::vector<std::string>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }

  // Process ids producing / consuming the given artifact.
  std::vector<std::string> producers_of(const std::string& digest) const;
  std::vector<std::string> consumers_of(const std::string& digest) const;

  // All ancestors reachable backward from the roots, including the roots,
  // closed over the outputs of every included process. Node lists are
  // deterministic (map-ordered by id).
  TraceGraph ancestry(const std::vector<std::string>& roots) const;

  bool artifact_known(const std::string& digest) const;

 private:
  void index_record(const ProcessRecord& r);

  Repo repo_;
  const ArtifactStore* store_;
  std::map<std::string, ProcessRecord> processes_;
  std::vector<std::string> order_;  // append order
  std::multimap<std::string, std::string> produced_by_;  // artifact -> process
  std::multimap<std::string, std::string> consumed_by_;  // artifact -> process
};

// Structural validation: closure, acyclicity, bipartiteness, single-producer
// and per-record field invariants. Pure function of the graph; empty result
// means valid.
std::vector<Violation> validate_graph(const TraceGraph& g);

// Process ids in dependency order (producers before consumers), ties broken
// by process_id. Throws CycleError if no such order exists.
std::vector<std::string> topo_order(const TraceGraph& g);

}  // namespace certpro
