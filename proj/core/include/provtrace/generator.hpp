#pragma once

#include "provtrace/event.hpp"
#include "provtrace/graph.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace provtrace {

struct GeneratorOptions {
    std::uint64_t seed{1};
    std::string server{"srv1"};
    std::string database; // defaults per workload
    std::int64_t start_ts{1'700'000'000'000'000}; // microseconds
    // Emit the full expected graph into the ground truth when the
    // workload has at most this many activities (it grows linearly).
    std::size_t full_truth_limit{64};
    bool force_full_truth{false};
};

// What one generated activity is expected to produce.
struct ActivityTruth {
    std::string activity_id;
    std::string proc_key; // schema-qualified procedure, empty for plain batches
    std::int64_t trigger_ts{};
    std::size_t node_count{};
    std::set<std::string> root_inputs;  // qualified names
    std::set<std::string> root_outputs;
};

// Expected extraction results, derived from the generator's own activity
// structure and per-template lineage declarations. Never touches the
// parsing/analysis pipeline, so it serves as an independent oracle.
struct GroundTruth {
    std::string server;
    std::string database;
    std::uint64_t total_events{};
    std::vector<ActivityTruth> activities;

    bool full_graph{false};
    std::map<std::string, std::string> entities; // qualified name -> type name
    std::set<std::array<std::string, 3>> relationships; // type, from qn, to qn
    std::map<std::string, ColumnMapping> column_mappings; // process qn -> map

    std::string to_json() const;
    static GroundTruth from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static GroundTruth load(const std::filesystem::path& path);

    // Entity/edge set comparison against an extracted graph (attributes
    // are not compared). Empty result = exact match.
    std::vector<std::string> diff(const ProvenanceGraph& g) const;
};

struct GeneratedWorkload {
    std::vector<QueryEvent> events; // ordered by (ts, seq)
    GroundTruth truth;
};

struct RunningExampleParams {
    int version{2}; // selects the branch taken inside the inner procedure
    int repeats{1};
};

// The two-procedure sales ingestion workflow: a staging table loaded from
// a CSV and appended to a history table through a nested procedure call.
// Each repeat is one activity of 10 events.
GeneratedWorkload gen_running_example(const RunningExampleParams& params,
                                      const GeneratorOptions& opts = {});

struct OltpParams {
    int transactions{100};
    int clients{4};
    int sp_count{5};
    int loop_iters{8};
    int stmts_per_tx{125};
    bool schema_setup{true}; // emit one DDL activity creating the schema
};

// Transactional load: `clients` interleaved streams, each transaction one
// activity executing a stored procedure with a statement loop. Procedure
// bodies are deterministic in the parameters; statement literals vary per
// transaction. Roughly 2 * stmts_per_tx events per transaction.
GeneratedWorkload gen_oltp(const OltpParams& params,
                           const GeneratorOptions& opts = {});

struct PlanVariantParams {
    // Plan payload bytes are sized so total log bytes become roughly
    // (1 + bytes_factor) times the original.
    double bytes_factor{9.0};
    // Fraction of statement completions that emit a plan event.
    double events_fraction{1.0};
};

// Derives a plan-carrying variant of a log: one auxiliary plan event per
// selected statement completion, payload sized per bytes_factor. The
// extraction result is unchanged; only the byte volume grows.
std::vector<QueryEvent> gen_plan_variant(const std::vector<QueryEvent>& events,
                                         const PlanVariantParams& params,
                                         std::uint64_t seed);

// Serialized size of the log in NDJSON form.
std::uint64_t log_bytes(const std::vector<QueryEvent>& events);

// Writes events-<partition>-<first_seq>.ndjson files.
void write_log(const std::vector<QueryEvent>& events,
               const std::filesystem::path& dir, int events_per_file = 100000);

} // namespace provtrace
