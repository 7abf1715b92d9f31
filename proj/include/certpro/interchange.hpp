#pragma once

#include <optional>
#include <string>

#include "certpro/graph.hpp"
#include "certpro/types.hpp"

namespace certpro {

// Canonical, self-contained trace document: format_version "1", node lists
// sorted by id, sorted keys, no insignificant whitespace. A given graph has
// exactly one byte serialization.
Json trace_document(const TraceGraph& g);

// Schema check for an interchange document; throws SchemaError naming the
// missing or ill-typed field.
void validate_trace_schema(const Json& doc);

// Canonical export of trace_ancestry(roots). With bundle_dir set, also
// writes every artifact's verified bytes keyed by digest (StorageError if
// any object is missing or corrupt).
std::string export_trace(const Ledger& ledger, const ArtifactStore& store,
                         const std::vector<std::string>& roots,
                         const std::optional<fs::path>& bundle_dir = std::nullopt);

// Validates canonical form, closure and acyclicity, stores bundled objects
// (each verified against its digest) and appends records idempotently.
// Re-export after import is byte-identical to the input.
TraceGraph import_trace(ArtifactStore& store, Ledger& ledger, const std::string& doc_bytes,
                        const std::optional<fs::path>& bundle_dir = std::nullopt);

// Graphviz DOT: artifacts as boxes (short digest + data format), processes
// as ellipses (transformation type), edges input -> process -> output.
std::string render_dot(const TraceGraph& g);

// Self-contained offline HTML report for an issued certificate.
std::string render_report(const Json& certificate, const TraceGraph& g);

}  // namespace certpro
