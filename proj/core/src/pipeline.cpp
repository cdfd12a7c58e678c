#include "provtrace/pipeline.hpp"

#include "provtrace/catalog.hpp"
#include "provtrace/errors.hpp"
#include "provtrace/filters.hpp"
#include "provtrace/hash.hpp"
#include "provtrace/runtime_extractor.hpp"
#include "provtrace/sql_script.hpp"
#include "provtrace/stitcher.hpp"
#include "provtrace/uploader.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <sstream>

namespace provtrace {

using json = nlohmann::json;

namespace {

std::int64_t wall_clock_us() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

} // namespace

void install_builtin_filters(HookRegistry& registry, const Config& cfg) {
    const FilterConfig fc = cfg.filter_config();

    // Tree-level: compression, query routing, activity-level filters.
    auto router = std::make_shared<QueryRouter>(fc);
    auto fc_shared = std::make_shared<FilterConfig>(fc);
    registry.register_hook(
        {HookStage::CollectorTreeBuild, HookKind::PerItem},
        [router, fc_shared](HookState& state) {
            if (!state.tree || state.drop) return;
            loop_compress(*state.tree, fc_shared->loop_iters_admitted);
            apply_query_routes(*state.tree, *router);
            if (!keep_activity(*state.tree, *fc_shared)) state.drop = true;
        });

    // Batch-level: last-K admission over the collect window.
    registry.register_hook(
        {HookStage::Collector, HookKind::PreSend},
        [fc_shared](HookState& state) {
            if (!state.batch) return;
            *state.batch = admit_last_k_runs(std::move(*state.batch),
                                             fc_shared->sp_runs_admitted,
                                             *fc_shared);
        });

    // Graph-level: aggregation level dropping.
    registry.register_hook(
        {HookStage::Aggregator, HookKind::End}, [fc_shared](HookState& state) {
            if (!state.graph) return;
            *state.graph =
                drop_aggregation_levels(std::move(*state.graph),
                                        fc_shared->emit_levels);
        });
}

PipelineResult run_extract(const Config& cfg, const PipelineOptions& opts) {
    const auto t_total_start = std::chrono::steady_clock::now();

    if (cfg.log_dir.empty()) throw ConfigError("source.log_dir is not set");

    StageClock clock;
    PipelineResult result;
    RunReport& report = result.report;

    HookRegistry hooks;
    install_builtin_filters(hooks, cfg);
    // External hooks run after the builtin filters at each point.
    const HookRegistry* extra = opts.extra_hooks;
    auto invoke = [&hooks, extra](HookPoint point, HookState& state) {
        hooks.invoke(point, state);
        if (extra) extra->invoke(point, state);
    };

    const std::int64_t now_us = opts.now_us != 0 ? opts.now_us : wall_clock_us();

    {
        HookState s;
        invoke({HookStage::Pipeline, HookKind::Start}, s);
        invoke({HookStage::Collector, HookKind::Start}, s);
    }

    // ---- collect ----
    Checkpoint checkpoint = load_checkpoint(cfg.checkpoint_path);
    CollectorOptions collector_opts;
    collector_opts.staleness_horizon_us =
        static_cast<std::int64_t>(cfg.staleness_hours * 3600.0 * 1e6);

    DirectoryLogSource source{std::filesystem::path(cfg.log_dir)};
    CollectResult collected =
        collect(source, checkpoint, now_us, collector_opts, &clock);
    report.events_read = collected.events_read;
    report.bytes_read = collected.bytes_read;
    report.activities_collected = collected.activities.size();
    report.activities_deferred = collected.activities_deferred;
    for (auto& diag : collected.diagnostics) {
        ++report.activities_errored;
        report.diagnostics.push_back(std::move(diag));
    }

    // ---- build trees, tree-level filters ----
    TreeBuildOptions tree_opts;
    tree_opts.strict_subtree = cfg.fig6_strict_subtree;

    std::vector<QueryTree> batch;
    batch.reserve(collected.activities.size());
    {
        HookState s;
        invoke({HookStage::CollectorTreeBuild, HookKind::Start}, s);
    }
    for (auto& activity : collected.activities) {
        const std::string activity_id = activity.activity_id;
        QueryTree tree;
        {
            StageTimer t(&clock, Stage::TreeBuild);
            try {
                tree = build_query_tree(std::move(activity), tree_opts);
            } catch (const MalformedActivity& err) {
                ++report.activities_errored;
                report.diagnostics.push_back({activity_id, err.what()});
                continue;
            }
        }
        StageTimer t(&clock, Stage::Filter);
        HookState s;
        s.tree = &tree;
        invoke({HookStage::CollectorTreeBuild, HookKind::PerItem}, s);
        if (s.drop) {
            ++report.activities_filtered;
            continue;
        }
        batch.push_back(std::move(tree));
    }
    {
        HookState s;
        invoke({HookStage::CollectorTreeBuild, HookKind::End}, s);
    }

    // ---- batch-level admission ----
    {
        StageTimer t(&clock, Stage::Filter);
        const std::size_t before = batch.size();
        HookState s;
        s.batch = &batch;
        invoke({HookStage::Collector, HookKind::PreSend}, s);
        report.activities_filtered += before - batch.size();
        invoke({HookStage::Collector, HookKind::PostSend}, s);
        HookState end_state;
        end_state.batch = &batch;
        invoke({HookStage::Collector, HookKind::End}, end_state);
    }

    // ---- extraction ----
    sql::CatalogState catalog = sql::CatalogState::load(cfg.state_path);
    const sql::BindingMode mode = cfg.mode();
    const sql::AnalyzerOptions analyzer_opts = cfg.analyzer_options();

    ProvenanceGraph graph;
    {
        HookState s;
        invoke({HookStage::RuntimeExtractor, HookKind::Start}, s);
        invoke({HookStage::ProvenanceExtractor, HookKind::Start}, s);
        invoke({HookStage::Stitcher, HookKind::Start}, s);
    }
    for (auto& tree : batch) {
        HookState item_state;
        item_state.tree = &tree;

        RuntimeExtract runtime;
        {
            StageTimer t(&clock, Stage::RuntimeExtract);
            invoke({HookStage::RuntimeExtractor, HookKind::PerItem}, item_state);
            try {
                runtime = extract_runtime(tree);
            } catch (const Error& err) {
                ++report.activities_errored;
                report.diagnostics.push_back({tree.activity.activity_id,
                                              err.what()});
                continue;
            }
        }

        sql::ExtractOutput lineage;
        {
            StageTimer t(&clock, Stage::ProvenanceExtract);
            invoke({HookStage::ProvenanceExtractor, HookKind::PerItem},
                   item_state);
            sql::SqlScript script = sql::generate_script(tree);
            report.statements_analyzed += script.statements.size();
            lineage = sql::extract_provenance(script, catalog, mode,
                                              analyzer_opts);
            for (auto& diag : lineage.diagnostics) {
                report.diagnostics.push_back(
                    {tree.activity.activity_id, std::move(diag)});
            }
        }

        {
            StageTimer t(&clock, Stage::Stitch);
            invoke({HookStage::Stitcher, HookKind::PerItem}, item_state);
            ProvenanceGraph activity_graph =
                stitch(runtime, lineage.by_node, tree);
            graph = merge(graph, activity_graph);
        }
        ++report.activities_processed;
    }
    {
        StageTimer t(&clock, Stage::Stitch);
        HookState s;
        s.graph = &graph;
        invoke({HookStage::Stitcher, HookKind::End}, s);
    }

    // ---- aggregate ----
    {
        StageTimer t(&clock, Stage::Aggregate);
        HookState s;
        invoke({HookStage::Aggregator, HookKind::Start}, s);
        graph = aggregate_across_runs(std::move(graph));
        graph = column_rollup(std::move(graph));
        s.graph = &graph;
        invoke({HookStage::Aggregator, HookKind::End}, s);

        std::vector<std::string> issues = validate(graph);
        for (auto& issue : issues) {
            report.diagnostics.push_back({"graph", std::move(issue)});
        }
        if (!issues.empty()) {
            throw ValidationFailure("graph failed validation after aggregation");
        }
    }
    report.graph_entities = graph.entities.size();
    report.graph_relationships = graph.relationships.size();

    // ---- upload ----
    if (!cfg.sink.empty()) {
        std::vector<UploadBatch> batches;
        {
            StageTimer t(&clock, Stage::Compile);
            auto docs = compile_graph(graph, target_format_from(cfg.target_format));
            batches = partition_batches(docs, cfg.batch_size);
        }
        {
            StageTimer t(&clock, Stage::Upload);
            HookState s;
            s.graph = &graph;
            invoke({HookStage::Uploader, HookKind::Start}, s);
            invoke({HookStage::Uploader, HookKind::PreSend}, s);

            std::uint64_t tag_hash = kFnv64Offset;
            for (const auto& b : batches) {
                tag_hash = fnv1a64_mix(b.id, tag_hash);
                tag_hash = fnv1a64_mix(b.items.size(), tag_hash);
            }
            UploadOptions upload_opts;
            upload_opts.max_attempts = cfg.retry_max_attempts;
            upload_opts.base_delay_ms = cfg.retry_base_ms;
            upload_opts.backoff_factor = cfg.retry_factor;
            upload_opts.graph_tag = to_hex(tag_hash);

            auto sink = open_sink(cfg.sink);
            UploadReport upload_report = upload(
                *sink, batches, cfg.upload_checkpoint_path, upload_opts);
            report.batches_delivered = upload_report.delivered.size();
            report.batches_skipped = upload_report.skipped.size();

            // The checkpoint served its resume purpose.
            std::error_code ec;
            std::filesystem::remove(cfg.upload_checkpoint_path, ec);

            invoke({HookStage::Uploader, HookKind::PostSend}, s);
            invoke({HookStage::Uploader, HookKind::End}, s);
        }
    }

    // ---- finalize ----
    {
        StageTimer t(&clock, Stage::Finalize);
        save_checkpoint(collected.updated, cfg.checkpoint_path);
        catalog.save(cfg.state_path);
        HookState s;
        s.graph = &graph;
        invoke({HookStage::Pipeline, HookKind::End}, s);
    }

    report.log_read_ms = clock.ms(Stage::LogRead);
    report.log_parse_ms = clock.ms(Stage::LogParse);
    report.group_sort_ms = clock.ms(Stage::GroupSort);
    report.tree_build_ms = clock.ms(Stage::TreeBuild);
    report.filter_ms = clock.ms(Stage::Filter);
    report.runtime_extract_ms = clock.ms(Stage::RuntimeExtract);
    report.provenance_extract_ms = clock.ms(Stage::ProvenanceExtract);
    report.stitch_ms = clock.ms(Stage::Stitch);
    report.aggregate_ms = clock.ms(Stage::Aggregate);
    report.compile_ms = clock.ms(Stage::Compile);
    report.upload_ms = clock.ms(Stage::Upload);
    report.finalize_ms = clock.ms(Stage::Finalize);
    report.total_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t_total_start)
                          .count();

    if (opts.keep_graph) result.graph = std::move(graph);
    return result;
}

std::string RunReport::to_json() const {
    json j;
    json stages;
    stages["log_read_ms"] = log_read_ms;
    stages["log_parse_ms"] = log_parse_ms;
    stages["group_sort_ms"] = group_sort_ms;
    stages["tree_build_ms"] = tree_build_ms;
    stages["filter_ms"] = filter_ms;
    stages["runtime_extract_ms"] = runtime_extract_ms;
    stages["provenance_extract_ms"] = provenance_extract_ms;
    stages["stitch_ms"] = stitch_ms;
    stages["aggregate_ms"] = aggregate_ms;
    stages["compile_ms"] = compile_ms;
    stages["upload_ms"] = upload_ms;
    stages["finalize_ms"] = finalize_ms;
    j["stages"] = std::move(stages);
    j["total_ms"] = total_ms;

    json counts;
    counts["events_read"] = events_read;
    counts["bytes_read"] = bytes_read;
    counts["activities_collected"] = activities_collected;
    counts["activities_deferred"] = activities_deferred;
    counts["activities_errored"] = activities_errored;
    counts["activities_filtered"] = activities_filtered;
    counts["activities_processed"] = activities_processed;
    counts["statements_analyzed"] = statements_analyzed;
    counts["graph_entities"] = graph_entities;
    counts["graph_relationships"] = graph_relationships;
    counts["batches_delivered"] = batches_delivered;
    counts["batches_skipped"] = batches_skipped;
    j["counts"] = std::move(counts);

    json diags = json::array();
    std::size_t limit = std::min<std::size_t>(diagnostics.size(), 200);
    for (std::size_t i = 0; i < limit; ++i) {
        diags.push_back({{"context", diagnostics[i].context},
                         {"message", diagnostics[i].message}});
    }
    j["diagnostics"] = std::move(diags);
    j["diagnostics_total"] = diagnostics.size();
    return j.dump(2);
}

RunReport RunReport::from_json(const std::string& text) {
    json j = json::parse(text);
    RunReport r;
    const json& stages = j.at("stages");
    r.log_read_ms = stages.value("log_read_ms", 0.0);
    r.log_parse_ms = stages.value("log_parse_ms", 0.0);
    r.group_sort_ms = stages.value("group_sort_ms", 0.0);
    r.tree_build_ms = stages.value("tree_build_ms", 0.0);
    r.filter_ms = stages.value("filter_ms", 0.0);
    r.runtime_extract_ms = stages.value("runtime_extract_ms", 0.0);
    r.provenance_extract_ms = stages.value("provenance_extract_ms", 0.0);
    r.stitch_ms = stages.value("stitch_ms", 0.0);
    r.aggregate_ms = stages.value("aggregate_ms", 0.0);
    r.compile_ms = stages.value("compile_ms", 0.0);
    r.upload_ms = stages.value("upload_ms", 0.0);
    r.finalize_ms = stages.value("finalize_ms", 0.0);
    r.total_ms = j.value("total_ms", 0.0);
    const json& counts = j.at("counts");
    r.events_read = counts.value("events_read", 0ull);
    r.bytes_read = counts.value("bytes_read", 0ull);
    r.activities_collected = counts.value("activities_collected", 0ull);
    r.activities_deferred = counts.value("activities_deferred", 0ull);
    r.activities_errored = counts.value("activities_errored", 0ull);
    r.activities_filtered = counts.value("activities_filtered", 0ull);
    r.activities_processed = counts.value("activities_processed", 0ull);
    r.statements_analyzed = counts.value("statements_analyzed", 0ull);
    r.graph_entities = counts.value("graph_entities", 0ull);
    r.graph_relationships = counts.value("graph_relationships", 0ull);
    r.batches_delivered = counts.value("batches_delivered", 0ull);
    r.batches_skipped = counts.value("batches_skipped", 0ull);
    for (const auto& d : j.value("diagnostics", json::array())) {
        r.diagnostics.push_back(
            {d.value("context", ""), d.value("message", "")});
    }
    return r;
}

void RunReport::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw SourceUnavailable("cannot write report: " + path.string());
    out << to_json() << "\n";
}

RunReport RunReport::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SourceUnavailable("cannot read report: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

} // namespace provtrace
