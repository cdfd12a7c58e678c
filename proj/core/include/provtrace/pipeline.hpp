#pragma once

#include "provtrace/collector.hpp"
#include "provtrace/config.hpp"
#include "provtrace/graph.hpp"
#include "provtrace/hooks.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace provtrace {

// Per-run outcome: stage wall times, item counts, and diagnostics.
struct RunReport {
    double log_read_ms{};
    double log_parse_ms{};
    double group_sort_ms{};
    double tree_build_ms{};
    double filter_ms{};
    double runtime_extract_ms{};
    double provenance_extract_ms{};
    double stitch_ms{};
    double aggregate_ms{};
    double compile_ms{};
    double upload_ms{};
    double finalize_ms{};
    double total_ms{};

    std::uint64_t events_read{};
    std::uint64_t bytes_read{};
    std::uint64_t activities_collected{};
    std::uint64_t activities_deferred{};
    std::uint64_t activities_errored{};
    std::uint64_t activities_filtered{};
    std::uint64_t activities_processed{};
    std::uint64_t statements_analyzed{};
    std::uint64_t graph_entities{};
    std::uint64_t graph_relationships{};
    std::uint64_t batches_delivered{};
    std::uint64_t batches_skipped{};

    std::vector<Diagnostic> diagnostics;

    double stage_sum_ms() const {
        return log_read_ms + log_parse_ms + group_sort_ms + tree_build_ms +
               filter_ms + runtime_extract_ms + provenance_extract_ms +
               stitch_ms + aggregate_ms + compile_ms + upload_ms + finalize_ms;
    }

    std::string to_json() const;
    static RunReport from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static RunReport load(const std::filesystem::path& path);
};

struct PipelineOptions {
    // Run start; 0 means wall clock. Drives checkpointing.
    std::int64_t now_us{0};
    // Extra hooks to install besides the config-driven builtin filters.
    HookRegistry* extra_hooks{nullptr};
    // Keep the final graph in the result (off saves memory on big runs
    // when only the report matters).
    bool keep_graph{true};
};

struct PipelineResult {
    ProvenanceGraph graph;
    RunReport report;
};

// Installs the configured noise-reduction filters at their hook points:
// loop compression, query routing and activity filters at the tree-build
// per-item point, last-K admission right before the collector sends its
// batch, and aggregation-level dropping at the aggregator's end.
void install_builtin_filters(HookRegistry& registry, const Config& cfg);

// The end-to-end run: collect -> build trees -> filters -> runtime and
// lineage extraction -> stitch -> aggregate -> upload. Per-activity
// problems become diagnostics; configuration and sink failures throw.
PipelineResult run_extract(const Config& cfg, const PipelineOptions& opts = {});

} // namespace provtrace
