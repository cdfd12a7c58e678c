#pragma once

#include "provtrace/query_tree.hpp"
#include "provtrace/sql_analyzer.hpp"

#include <map>
#include <string>
#include <vector>

namespace provtrace::sql {

// One statement of a per-activity script, located back to the tree node
// it originated from.
struct ScriptStatement {
    std::string node_id;
    std::string text;
    std::size_t offset{}; // char span in the concatenated script
    std::size_t length{};
    std::string bindings_json; // pre-bound annotations from the event, if any
};

struct SqlScript {
    std::vector<ScriptStatement> statements;
    std::string text; // statements joined by newlines
};

// DFS pre-order over the tree, appending each visited node's query text.
// Nodes routed away from lineage extraction are skipped; every remaining
// node with query text appears exactly once.
SqlScript generate_script(const QueryTree& tree);

struct ExtractOutput {
    std::map<std::string, StatementProvenance> by_node;
    std::vector<std::string> diagnostics;
};

// Folds catalog replay and statement analysis over the script in order,
// so later statements see earlier DDL (including tables created by
// SELECT ... INTO). Never throws on statement content; problems surface
// as per-statement diagnostics.
ExtractOutput extract_provenance(const SqlScript& script, CatalogState& catalog,
                                 BindingMode mode, const AnalyzerOptions& opts = {});

} // namespace provtrace::sql
