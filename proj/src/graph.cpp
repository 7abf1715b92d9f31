#include "certpro/graph.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include "certpro/digest.hpp"
#include "certpro/errors.hpp"

namespace certpro {

namespace {

// Outputs that are also inputs (identity transforms re-emit their input
// bytes) carry no producer edge; the artifact already exists upstream.
std::vector<std::string> effective_outputs(const ProcessRecord& r) {
  std::set<std::string> inputs(r.inputs.begin(), r.inputs.end());
  std::vector<std::string> out;
  for (const auto& o : r.outputs)
    if (!inputs.count(o)) out.push_back(o);
  return out;
}

}  // namespace

Ledger::Ledger(const Repo& repo, const ArtifactStore& store) : repo_(repo), store_(&store) {
  std::ifstream f(repo_.ledger_file(), std::ios::binary);
  if (!f) fail(Errc::Storage, "cannot open ledger at " + repo_.ledger_file().string());
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) break;  // torn final line from an interrupted append
    index_record(process_from_json(j, "ledger record"));
  }
}

void Ledger::index_record(const ProcessRecord& r) {
  order_.push_back(r.process_id);
  for (const auto& in : r.inputs) consumed_by_.emplace(in, r.process_id);
  for (const auto& out : effective_outputs(r)) produced_by_.emplace(out, r.process_id);
  processes_.emplace(r.process_id, r);
}

bool Ledger::has_process(const std::string& process_id) const {
  return processes_.count(process_id) > 0;
}

const ProcessRecord& Ledger::process(const std::string& process_id) const {
  auto it = processes_.find(process_id);
  if (it == processes_.end()) fail(Errc::NotFound, "no process " + process_id);
  return it->second;
}

std::vector<std::string> Ledger::producers_of(const std::string& digest) const {
  std::vector<std::string> out;
  auto [lo, hi] = produced_by_.equal_range(digest);
  for (auto it = lo; it != hi; ++it) out.push_back(it->second);
  return out;
}

std::vector<std::string> Ledger::consumers_of(const std::string& digest) const {
  std::vector<std::string> out;
  auto [lo, hi] = consumed_by_.equal_range(digest);
  for (auto it = lo; it != hi; ++it) out.push_back(it->second);
  return out;
}

bool Ledger::artifact_known(const std::string& digest) const {
  return store_->has_meta(ArtifactId{digest}) || produced_by_.count(digest) > 0;
}

std::string Ledger::record(ProcessRecord r, const std::set<std::string>& assume_known) {
  r.process_id = compute_process_id(r);

  if (auto problems = check_record_invariants(r); !problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    fail(Errc::Validation, msg);
  }
  if (processes_.count(r.process_id)) return r.process_id;  // idempotent duplicate

  for (const auto& in : r.inputs)
    if (!artifact_known(in) && !assume_known.count(in))
      fail(Errc::DanglingReference, "input " + in + " is not resolvable");
  for (const auto& out : r.outputs)
    if (!store_->has_meta(ArtifactId{out}) && !assume_known.count(out))
      fail(Errc::DanglingReference, "output " + out + " is not in the store");

  // Repeated ingestion of identical bytes is two observations of the same
  // acquisition; the single-producer rule applies between transformations.
  for (const auto& out : effective_outputs(r)) {
    for (const auto& pid : producers_of(out)) {
      if (!r.is_ingestion() || !processes_.at(pid).is_ingestion())
        fail(Errc::DuplicateProducer, "artifact " + out + " already produced by " + pid);
    }
  }

  // A cycle needs a forward path from one of this record's outputs back to
  // one of its inputs through the existing graph.
  {
    std::set<std::string> inputs(r.inputs.begin(), r.inputs.end());
    std::set<std::string> seen;
    std::deque<std::string> frontier(r.outputs.begin(), r.outputs.end());
    while (!frontier.empty()) {
      std::string a = frontier.front();
      frontier.pop_front();
      if (!seen.insert(a).second) continue;
      for (const auto& pid : consumers_of(a)) {
        for (const auto& out : effective_outputs(processes_.at(pid))) {
          if (inputs.count(out))
            fail(Errc::Cycle, "record would close a cycle through artifact " + out);
          frontier.push_back(out);
        }
      }
    }
  }

  const std::string line = canonical_dump(to_json(r)) + "\n";
  {
    RepoLock lock(repo_);
    int fd = ::open(repo_.ledger_file().c_str(), O_WRONLY | O_APPEND);
    if (fd < 0) fail(Errc::Storage, "cannot open ledger for append");
    ssize_t n = ::write(fd, line.data(), line.size());
    if (n != static_cast<ssize_t>(line.size()) || ::fsync(fd) != 0) {
      ::close(fd);
      fail(Errc::Storage, "ledger append failed");
    }
    ::close(fd);
  }
  index_record(r);
  return r.process_id;
}

TraceGraph Ledger::ancestry(const std::vector<std::string>& roots) const {
  TraceGraph g;
  std::set<std::string> root_set;
  for (const auto& r : roots) {
    if (!artifact_known(r)) fail(Errc::NotFound, "unknown root " + r);
    root_set.insert(r);
  }
  g.roots.assign(root_set.begin(), root_set.end());

  std::set<std::string> seen_artifacts, seen_processes;
  std::deque<std::string> frontier(g.roots.begin(), g.roots.end());
  while (!frontier.empty()) {
    std::string a = frontier.front();
    frontier.pop_front();
    if (!seen_artifacts.insert(a).second) continue;
    if (store_->has_meta(ArtifactId{a}))
      g.artifacts.emplace(a, store_->stat(ArtifactId{a}));
    else
      g.missing_meta.insert(a);
    if (!store_->has_object(ArtifactId{a})) g.missing_objects.insert(a);
    for (const auto& pid : producers_of(a)) {
      if (!seen_processes.insert(pid).second) continue;
      const ProcessRecord& p = processes_.at(pid);
      g.processes.emplace(pid, p);
      for (const auto& in : p.inputs) frontier.push_back(in);
      for (const auto& out : p.outputs) frontier.push_back(out);  // sibling closure
    }
  }
  return g;
}

std::vector<Violation> validate_graph(const TraceGraph& g) {
  std::vector<Violation> v;

  for (const auto& [id, a] : g.artifacts) {
    if (!is_hex_digest(id)) v.push_back({"record", id, "malformed artifact digest"});
    if (a.id.digest != id) v.push_back({"record", id, "artifact document id mismatch"});
    if (g.processes.count(id)) v.push_back({"bipartite", id, "id is both artifact and process"});
  }

  for (const auto& id : g.missing_meta)
    v.push_back({"closure", id, "artifact " + id + " has no metadata document"});
  for (const auto& id : g.missing_objects)
    if (!g.missing_meta.count(id))
      v.push_back({"closure", id, "object " + id + " is absent from the store"});

  std::multimap<std::string, std::string> producers;
  for (const auto& [pid, p] : g.processes) {
    if (compute_process_id(p) != pid)
      v.push_back({"record", pid, "process_id does not match canonical record body"});
    for (const auto& problem : check_record_invariants(p)) v.push_back({"record", pid, problem});
    for (const auto& ref : p.inputs)
      if (!g.artifacts.count(ref) && !g.missing_meta.count(ref))
        v.push_back({"closure", pid, "input " + ref + " not defined in graph"});
    for (const auto& ref : p.outputs)
      if (!g.artifacts.count(ref) && !g.missing_meta.count(ref))
        v.push_back({"closure", pid, "output " + ref + " not defined in graph"});
    for (const auto& out : effective_outputs(p)) producers.emplace(out, pid);
  }

  for (auto it = producers.begin(); it != producers.end();) {
    auto [lo, hi] = producers.equal_range(it->first);
    std::size_t n = 0;
    bool all_ingestion = true;
    for (auto p = lo; p != hi; ++p, ++n)
      if (!g.processes.at(p->second).is_ingestion()) all_ingestion = false;
    if (n > 1 && !all_ingestion)
      v.push_back({"single-producer", it->first,
                   "artifact " + it->first + " has " + std::to_string(n) + " producers"});
    it = hi;
  }

  try {
    topo_order(g);
  } catch (const Error& e) {
    if (e.code() == Errc::Cycle) v.push_back({"acyclicity", "", e.what()});
  }
  return v;
}

std::vector<std::string> topo_order(const TraceGraph& g) {
  // Process-level Kahn: producer before consumer, ties by process_id.
  std::map<std::string, std::set<std::string>> succ;
  std::map<std::string, std::size_t> indegree;
  std::multimap<std::string, std::string> producers;
  for (const auto& [pid, p] : g.processes) {
    indegree.emplace(pid, 0);
    for (const auto& out : effective_outputs(p)) producers.emplace(out, pid);
  }
  for (const auto& [pid, p] : g.processes) {
    for (const auto& in : p.inputs) {
      auto [lo, hi] = producers.equal_range(in);
      for (auto it = lo; it != hi; ++it)
        if (it->second != pid && succ[it->second].insert(pid).second) ++indegree[pid];
    }
  }
  std::set<std::string> ready;
  for (const auto& [pid, deg] : indegree)
    if (deg == 0) ready.insert(pid);
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string pid = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(pid);
    for (const auto& next : succ[pid])
      if (--indegree[next] == 0) ready.insert(next);
  }
  if (order.size() != g.processes.size())
    fail(Errc::Cycle, "trace graph contains a cycle among its processes");
  return order;
}

}  // namespace certpro
