#pragma once

#include "provtrace/catalog.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace provtrace::sql {

// Where binding information comes from:
//   PreBound   - per-statement binding annotations attached to the event,
//                falling through to the mirrored catalog, then best effort
//   StateBased - the mirrored catalog only
//   BestEffort - whatever resolves from the text itself; unresolved
//                references degrade to suggestions, all-inputs-affect-
//                all-outputs in the worst case
enum class BindingMode { PreBound, StateBased, BestEffort };

enum class Confidence { Exact, Suggested };

// A relation touched by a statement. `key` is the normalized catalog key
// for relations, the path for external files, and a stable text hash for
// sink-less query outputs.
struct RelationRef {
    enum class Kind { Relation, ExternalFile, QueryOutput };

    Kind kind{Kind::Relation};
    std::string key;
    int generation{1};
    bool is_view{false};

    auto operator<=>(const RelationRef&) const = default;

    // "<key>" or "<key>@<gen>"; used as the relation part of column ids.
    std::string identity() const;
};

std::string column_id(const RelationRef& rel, std::string_view column);

// Statement-level inputs, outputs, and the output-column -> input-columns
// map. Column ids are "<relation identity>#<column>", all lowercase;
// every column belongs to a relation listed in inputs or outputs.
struct StatementProvenance {
    std::string node_id;
    std::set<RelationRef> inputs;
    std::set<RelationRef> outputs;
    std::map<std::string, std::set<std::string>> column_map;
    Confidence confidence{Confidence::Exact};
    // Set when schemas were unresolved and the lineage defaulted to
    // all inputs affecting all outputs at the relation level.
    bool all_columns_fallback{false};
    std::vector<std::string> diagnostics;

    bool empty() const { return inputs.empty() && outputs.empty(); }
};

struct AnalyzerOptions {
    // Join/filter predicate columns do not feed output values and are
    // excluded from column lineage unless this is set.
    bool include_control_columns = false;
    // View expansion depth guard; cycles degrade to Suggested.
    int max_view_depth = 16;
};

// Per-statement binding annotations (PreBound mode), parsed from the
// event's extras: { "Object": {"columns": [...], "generation": n}, ... }.
struct BindingOverlay {
    std::map<std::string, CatalogObject> objects;

    static BindingOverlay from_json(const std::string& text);
};

// Statically analyzes one statement into relation- and column-level
// lineage under the statement type's SQL semantics. Never throws on bad
// input: unsupported syntax yields an empty result with a diagnostic and
// Suggested confidence.
StatementProvenance analyze_statement(std::string_view stmt,
                                      const CatalogState& catalog,
                                      BindingMode mode,
                                      const AnalyzerOptions& opts = {},
                                      const BindingOverlay* bindings = nullptr);

// Identity of an ad-hoc statement: hash over the case/whitespace
// normalized text (literals kept).
std::string statement_identity_hash(std::string_view stmt);

// If the statement is `EXECUTE <procname> ...` with a literal procedure
// name, returns the name parts. Dynamic EXEC (strings, variables)
// resolves to nothing.
std::optional<std::vector<std::string>> executed_procedure(std::string_view stmt);

// Quick syntactic check used by query filters: does this statement touch
// any dataset at all? (SET @a=2, BEGIN TRAN, ... do not.)
bool statement_accesses_datasets(std::string_view stmt);

} // namespace provtrace::sql
