#pragma once

#include "provtrace/graph.hpp"
#include "provtrace/query_tree.hpp"
#include "provtrace/runtime_extractor.hpp"
#include "provtrace/sql_script.hpp"

#include <map>
#include <string>

namespace provtrace {

// Unions the runtime and lineage extracts for one activity: creates
// dataset and column entities, attaches per-statement lineage to the
// node's run and static entities, and aggregates Input/Output edges to
// parent runs by recursive set union (a run's provenance is the union of
// its own statement's and that of every run it spawned).
//
// Throws MissingNode when a provenance node id is absent from the
// runtime extract's node map.
ProvenanceGraph stitch(const RuntimeExtract& runtime,
                       const std::map<std::string, sql::StatementProvenance>& prov,
                       const QueryTree& tree);

// Cross-run aggregation: every static query's Input/Output edges become
// the union over its runs'. Dataset instances are already deduplicated by
// qualified name. Idempotent.
ProvenanceGraph aggregate_across_runs(ProvenanceGraph g);

// Rolls column mappings up the spawned-by hierarchy and across runs:
// parent and static entities carry the key-wise set union of their
// descendants' mappings. Idempotent.
ProvenanceGraph column_rollup(ProvenanceGraph g);

// Qualified name of a relation reference in the context of the server /
// database the activity ran against.
std::string relation_qualified_name(const sql::RelationRef& ref,
                                    std::string_view server,
                                    std::string_view db);

EntityType relation_entity_type(const sql::RelationRef& ref);

} // namespace provtrace
