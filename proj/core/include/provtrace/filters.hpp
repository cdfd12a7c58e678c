#pragma once

#include "provtrace/event.hpp"
#include "provtrace/graph.hpp"
#include "provtrace/query_tree.hpp"

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace provtrace {

// Where a matched query goes: dropped entirely, kept for runtime metadata
// only, or through the full pipeline.
enum class QueryRoute { Drop, RuntimeOnly, Full };

enum class PatternKind { Type, SyntaxTemplate, Regex, NoDatasetAccess };

struct QueryPattern {
    PatternKind kind{PatternKind::Regex};
    std::string pattern;
    QueryRoute route{QueryRoute::Drop};
};

// Boolean expression over event metadata fields, e.g.
//   client_app_name = 'SSMS' or username = 'sa'
// String fields compare with = != like; counters with = != < <= > >=.
class MetadataExpr {
public:
    static MetadataExpr parse(const std::string& text); // throws ConfigError

    // False when the event lacks a referenced counter (e.g. duration on a
    // started event); such events are outside the predicate's domain.
    bool defined_for(const QueryEvent& e) const;
    bool eval(const QueryEvent& e) const;

    const std::string& text() const { return text_; }

    struct Node; // expression tree; defined in the implementation

private:
    std::shared_ptr<const Node> root_;
    std::string text_;
};

enum class PredicateQuantifier { Any, All };

// Drops an activity when the quantified expression holds over the events
// in its domain (All additionally requires a non-empty domain).
struct MetadataPredicate {
    PredicateQuantifier quantifier{PredicateQuantifier::Any};
    MetadataExpr expr;
};

enum class EmitLevel { Statement, Batch, Procedure };

struct FilterConfig {
    // Loop compression: keep the latest k iterations. Empty = unlimited.
    std::optional<int> loop_iters_admitted;
    // Admit activities only around the last K executions of each
    // interesting query. Empty = unlimited.
    std::optional<int> sp_runs_admitted;
    // When an activity is admitted because one query is within its last
    // K, keep the whole activity (execution context) or prune the stale
    // interesting nodes too.
    bool keep_context{false};
    // First matching pattern decides the route; no match means Full.
    std::vector<QueryPattern> patterns;
    std::vector<MetadataPredicate> drop_activity_predicates;
    std::set<EmitLevel> emit_levels{EmitLevel::Statement, EmitLevel::Batch,
                                    EmitLevel::Procedure};
    // Generator-side event buffer simulation; unset = lossless.
    std::optional<std::int64_t> drop_events_buffer_bytes;
    std::optional<double> drop_events_drain_bytes_per_sec;
};

// Route of one query under the configured patterns.
QueryRoute route_query(const std::string& stmt, const FilterConfig& cfg);

// Precompiled pattern matcher with a per-template route cache; the
// pipeline routes hundreds of thousands of statements per window.
// Not internally synchronized: one router per routing thread.
class QueryRouter {
public:
    explicit QueryRouter(const FilterConfig& cfg);
    ~QueryRouter();
    QueryRouter(QueryRouter&&) noexcept;
    QueryRouter& operator=(QueryRouter&&) noexcept;

    QueryRoute route(const std::string& stmt) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Parses "route|kind|pattern" lines ('#' comments, blank lines ignored).
std::vector<QueryPattern> parse_pattern_lines(std::string_view text);

// The production default pattern set (statistics collection, system
// administration, connection probes, ...).
const std::vector<QueryPattern>& builtin_patterns();

// Detects maximal runs of consecutive children whose literal-masked texts
// repeat as a cycle (period <= 32) and keeps only the last k repetitions,
// annotating survivors with the total iteration count. k unset leaves the
// tree unchanged; applying twice with the same k equals applying once.
void loop_compress(QueryTree& tree, std::optional<int> k);

// Applies routes to the tree: Drop prunes the subtree (the root is never
// pruned), RuntimeOnly marks the node. Returns false when nothing
// full-routed remains (the "no interesting query" drop condition).
bool apply_query_routes(QueryTree& tree, const QueryRouter& router);

// Activity-level drop decision: no full-routed node, or a metadata
// predicate mandates the drop.
bool keep_activity(const QueryTree& tree, const FilterConfig& cfg);

// Two-pass last-K admission over one collect window. Pass one records the
// last K executions of every interesting (full-routed) static query;
// pass two keeps the activities containing at least one of them. With
// keep_context=false, stale interesting nodes inside kept activities are
// pruned as well. Guarantees the last K executions of every interesting
// query survive.
std::vector<QueryTree> admit_last_k_runs(std::vector<QueryTree> batch,
                                         std::optional<int> K,
                                         const FilterConfig& cfg);

// Removes run/static process entities of excluded aggregation levels,
// reconnecting SpawnedBy edges through the removed runs so retained
// ancestors keep their (already aggregated) lineage. Referential
// integrity is preserved; orphaned client connections go too.
ProvenanceGraph drop_aggregation_levels(ProvenanceGraph g,
                                        const std::set<EmitLevel>& levels);

// Bounded-buffer retention: events arrive at their timestamps into a
// buffer drained at a fixed byte rate; on overflow the oldest buffered
// events are dropped. Models database-side event loss under load.
std::vector<QueryEvent> simulate_event_buffer(std::vector<QueryEvent> events,
                                              std::int64_t buffer_bytes,
                                              double drain_bytes_per_sec);

} // namespace provtrace
