#include "certpro/interchange.hpp"

#include <algorithm>
#include <sstream>

#include "certpro/digest.hpp"
#include "certpro/errors.hpp"

namespace certpro {

namespace {

std::string short_id(const std::string& digest) { return digest.substr(0, 8); }

// Objects a process vouches for beyond its inputs/outputs: code archive,
// config snapshot, reference data and auxiliary components.
std::vector<std::string> detail_refs(const TraceGraph& g) {
  std::vector<std::string> refs;
  for (const auto& [pid, p] : g.processes) {
    if (!p.details) continue;
    if (p.details->code_ref) refs.push_back(*p.details->code_ref);
    if (p.details->config_ref) refs.push_back(*p.details->config_ref);
    refs.insert(refs.end(), p.details->data_dependencies.begin(),
                p.details->data_dependencies.end());
    refs.insert(refs.end(), p.details->additional_components.begin(),
                p.details->additional_components.end());
  }
  return refs;
}

std::string html_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

Json trace_document(const TraceGraph& g) {
  Json artifacts = Json::array();
  for (const auto& [id, a] : g.artifacts) artifacts.push_back(to_json(a));
  Json processes = Json::array();
  for (const auto& [pid, p] : g.processes) processes.push_back(to_json(p));
  Json missing = Json::array();
  for (const auto& id : g.missing_meta) missing.push_back(id);
  std::vector<std::string> roots = g.roots;
  std::sort(roots.begin(), roots.end());
  return Json{{"artifacts", artifacts},
              {"format_version", "1"},
              {"missing", missing},
              {"processes", processes},
              {"roots", roots}};
}

void validate_trace_schema(const Json& doc) {
  if (!doc.is_object()) fail(Errc::Schema, "document: expected object");
  for (const char* key : {"artifacts", "format_version", "missing", "processes", "roots"})
    if (!doc.contains(key)) fail(Errc::Schema, "document: missing field '" + std::string(key) + "'");
  if (!doc["format_version"].is_string() || doc["format_version"].get<std::string>() != "1")
    fail(Errc::Schema, "document: field 'format_version' must be \"1\"");
  for (const char* key : {"artifacts", "missing", "processes", "roots"})
    if (!doc[key].is_array())
      fail(Errc::Schema, "document: field '" + std::string(key) + "' must be an array");
  for (size_t i = 0; i < doc["artifacts"].size(); ++i)
    artifact_from_json(doc["artifacts"][i], "artifacts[" + std::to_string(i) + "]");
  for (size_t i = 0; i < doc["processes"].size(); ++i)
    process_from_json(doc["processes"][i], "processes[" + std::to_string(i) + "]");
  for (const Json& e : doc["missing"])
    if (!e.is_string()) fail(Errc::Schema, "document: field 'missing' entries must be strings");
  for (const Json& e : doc["roots"])
    if (!e.is_string()) fail(Errc::Schema, "document: field 'roots' entries must be strings");
}

std::string export_trace(const Ledger& ledger, const ArtifactStore& store,
                         const std::vector<std::string>& roots,
                         const std::optional<fs::path>& bundle_dir) {
  TraceGraph g = ledger.ancestry(roots);
  std::string bytes = canonical_dump(trace_document(g));
  if (bundle_dir) {
    std::error_code ec;
    fs::create_directories(*bundle_dir, ec);
    if (ec) fail(Errc::Storage, "cannot create bundle directory " + bundle_dir->string());
    std::vector<std::string> ids;
    for (const auto& [id, a] : g.artifacts) ids.push_back(id);
    for (const auto& id : detail_refs(g)) ids.push_back(id);
    for (const auto& id : ids) {
      if (store.verify(ArtifactId{id}) != VerifyResult::Ok)
        fail(Errc::Storage, "object " + id + " is missing or corrupt; cannot bundle");
      atomic_write_file(*bundle_dir / id, store.get(ArtifactId{id}));
    }
    for (const auto& id : g.missing_meta)
      fail(Errc::Storage, "object " + id + " is missing or corrupt; cannot bundle");
  }
  return bytes;
}

TraceGraph import_trace(ArtifactStore& store, Ledger& ledger, const std::string& doc_bytes,
                        const std::optional<fs::path>& bundle_dir) {
  Json doc = Json::parse(doc_bytes, nullptr, false);
  if (doc.is_discarded()) fail(Errc::Schema, "document is not valid JSON");
  validate_trace_schema(doc);
  if (canonical_dump(doc) != doc_bytes)
    fail(Errc::CanonicalForm, "document bytes are not in canonical form");

  // Structural validation on the document's own graph before anything is
  // written.
  TraceGraph g;
  for (const Json& a : doc["artifacts"]) {
    Artifact art = artifact_from_json(a, "artifact");
    if (!is_hex_digest(art.id.digest)) fail(Errc::Schema, "artifact id is not a digest");
    g.artifacts.emplace(art.id.digest, std::move(art));
  }
  for (const Json& e : doc["missing"]) g.missing_meta.insert(e.get<std::string>());
  for (const Json& p : doc["processes"]) {
    ProcessRecord rec = process_from_json(p, "process");
    g.processes.emplace(rec.process_id, std::move(rec));
  }
  for (const Json& r : doc["roots"]) g.roots.push_back(r.get<std::string>());

  for (const auto& v : validate_graph(g)) {
    if (v.rule == "acyclicity") fail(Errc::Cycle, v.message);
    if (v.rule == "closure" && g.missing_meta.count(v.node_id)) continue;  // declared missing
    fail(Errc::Validation, v.rule + ": " + v.message);
  }

  for (const Json& a : doc["artifacts"]) {
    const std::string id = a["id"].get<std::string>();
    if (bundle_dir && fs::exists(*bundle_dir / id))
      store.put_object_with_document(read_file(*bundle_dir / id), a);
    else
      store.put_document(a);
  }
  if (bundle_dir)
    for (const auto& id : detail_refs(g)) {
      if (!fs::exists(*bundle_dir / id)) continue;
      if (store.put(read_file(*bundle_dir / id), {}).digest != id)
        fail(Errc::Integrity, "bundled object does not match digest " + id);
    }
  for (const std::string& pid : topo_order(g)) ledger.record(g.processes.at(pid), g.missing_meta);
  return ledger.ancestry(g.roots);
}

std::string render_dot(const TraceGraph& g) {
  std::ostringstream os;
  os << "digraph trace {\n  rankdir=LR;\n";
  for (const auto& [id, a] : g.artifacts) {
    os << "  \"" << id << "\" [shape=box, label=\"" << short_id(id);
    if (!a.meta.data_format.empty()) os << "\\n" << a.meta.data_format;
    os << "\"];\n";
  }
  for (const auto& id : g.missing_meta)
    os << "  \"" << id << "\" [shape=box, style=dashed, label=\"" << short_id(id)
       << "\\nmissing\"];\n";
  for (const auto& [pid, p] : g.processes)
    os << "  \"" << pid << "\" [shape=ellipse, label=\"" << p.transformation_type << "\"];\n";
  for (const auto& [pid, p] : g.processes) {
    for (const auto& in : p.inputs) os << "  \"" << in << "\" -> \"" << pid << "\";\n";
    for (const auto& out : p.outputs) os << "  \"" << pid << "\" -> \"" << out << "\";\n";
  }
  os << "}\n";
  return os.str();
}

std::string render_report(const Json& certificate, const TraceGraph& g) {
  const Json& report = certificate.at("report");
  const std::string doi = certificate.at("doi").at("prefix").get<std::string>() + "/" +
                          certificate.at("doi").at("suffix").get<std::string>();
  for (const auto& root : certificate.at("roots"))
    if (!g.artifacts.count(root.get<std::string>()))
      fail(Errc::NotFound, "certificate root " + root.get<std::string>() + " not in graph");

  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n"
     << "<title>Certificate of Reproducibility " << html_escape(doi) << "</title>\n"
     << "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}"
     << "td,th{border:1px solid #888;padding:4px 8px}"
     << ".badge{display:inline-block;padding:4px 12px;border-radius:4px;color:#fff}"
     << ".FULL{background:#2a7}.PARTIAL{background:#c80}.FRAGMENT{background:#c33}"
     << "pre{background:#f4f4f4;padding:1em;overflow:auto}</style></head><body>\n"
     << "<h1>Certificate of Reproducibility</h1>\n"
     << "<p><span class=\"badge " << certificate.at("badge").get<std::string>() << "\">"
     << certificate.at("badge").get<std::string>() << "</span></p>\n"
     << "<table>\n"
     << "<tr><th>Identifier</th><td>" << html_escape(doi) << "</td></tr>\n"
     << "<tr><th>Issued</th><td>" << html_escape(certificate.at("issued_at").get<std::string>())
     << "</td></tr>\n"
     << "<tr><th>Issuer</th><td>" << html_escape(certificate.at("issuer").get<std::string>())
     << "</td></tr>\n"
     << "<tr><th>Trace digest</th><td><code>"
     << html_escape(certificate.at("trace_digest").get<std::string>()) << "</code></td></tr>\n"
     << "</table>\n";

  os << "<h2>Findings</h2>\n";
  if (report.at("findings").empty()) {
    os << "<p>No findings; the trace covers the entire flow.</p>\n";
  } else {
    os << "<table>\n<tr><th>Severity</th><th>Node</th><th>Rule</th><th>Message</th></tr>\n";
    for (const Json& f : report.at("findings"))
      os << "<tr><td>" << html_escape(f.at("severity").get<std::string>()) << "</td><td><code>"
         << html_escape(f.at("node_id").get<std::string>()) << "</code></td><td>"
         << html_escape(f.at("rule").get<std::string>()) << "</td><td>"
         << html_escape(f.at("message").get<std::string>()) << "</td></tr>\n";
    os << "</table>\n";
  }

  os << "<h2>Trace</h2>\n<pre>" << html_escape(render_dot(g)) << "</pre>\n"
     << "</body></html>\n";
  return os.str();
}

}  // namespace certpro
