#pragma once

#include "provtrace/graph.hpp"
#include "provtrace/query_tree.hpp"

#include <map>
#include <optional>
#include <string>

namespace provtrace {

// Entities a tree node produced, for location tracking by the stitcher.
// EXECUTE statements additionally materialize the invoked procedure and
// its run; children of such a node hang under the procedure run.
struct NodeEntities {
    Guid static_guid;
    Guid run_guid;
    std::optional<Guid> proc_static_guid;
    std::optional<Guid> proc_run_guid;
};

// Processes and their relationships extracted from one tree: no datasets,
// no Input/Output edges. node_map has exactly one entry per node.
struct RuntimeExtract {
    ProvenanceGraph graph;
    std::map<std::string, NodeEntities> node_map;
};

// DFS over the tree. Per node: the static query entity and its run with a
// RunOf edge, run attributes from the node's events, a SpawnedBy edge to
// the parent's run, and a ConnectionOf edge to the client connection
// derived from the root event metadata.
//
// Throws IncompleteNode (as InvariantViolation) when a node lacks its
// completed event.
RuntimeExtract extract_runtime(const QueryTree& tree);

// Static identity of the query a node runs: the schema-qualified name for
// EXECUTE <proc>, a text hash otherwise. Used for last-K admission too.
std::string node_static_identity(const QueryTree& tree, const QueryTreeNode& node);

} // namespace provtrace
