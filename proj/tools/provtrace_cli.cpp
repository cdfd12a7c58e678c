// Command line driver: extraction runs, synthetic workload generation,
// graph validation, and run report printing.

#include "provtrace/config.hpp"
#include "provtrace/errors.hpp"
#include "provtrace/filters.hpp"
#include "provtrace/generator.hpp"
#include "provtrace/pipeline.hpp"
#include "provtrace/uploader.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct ExtractArgs {
    std::string config_path;
    std::string source;
    std::string checkpoint;
    std::string state;
    std::string sink;
    int batch_size{0};
    std::string target_format;
    std::string report_path{"run-report.json"};
    std::string loop_iters;
    std::string sp_runs;
    std::int64_t now_us{0};
};

int run_extract_cmd(const ExtractArgs& args) {
    provtrace::Config cfg = provtrace::Config::load(args.config_path);

    // Command line overrides.
    if (!args.source.empty()) cfg.log_dir = args.source;
    if (!args.checkpoint.empty()) cfg.checkpoint_path = args.checkpoint;
    if (!args.state.empty()) cfg.state_path = args.state;
    if (!args.sink.empty()) cfg.sink = args.sink;
    if (args.batch_size > 0) cfg.batch_size = args.batch_size;
    if (!args.target_format.empty()) cfg.target_format = args.target_format;
    auto parse_limit = [](const std::string& v) -> std::optional<int> {
        if (v == "inf") return std::nullopt;
        return std::stoi(v);
    };
    if (!args.loop_iters.empty())
        cfg.loop_iters_admitted = parse_limit(args.loop_iters);
    if (!args.sp_runs.empty()) cfg.sp_runs_admitted = parse_limit(args.sp_runs);

    provtrace::PipelineOptions opts;
    opts.now_us = args.now_us;
    opts.keep_graph = false;

    provtrace::PipelineResult result = provtrace::run_extract(cfg, opts);
    result.report.save(args.report_path);

    std::cout << "events read:           " << result.report.events_read << "\n"
              << "activities collected:  " << result.report.activities_collected
              << "\n"
              << "activities processed:  " << result.report.activities_processed
              << "\n"
              << "activities filtered:   " << result.report.activities_filtered
              << "\n"
              << "activities errored:    " << result.report.activities_errored
              << "\n"
              << "graph entities:        " << result.report.graph_entities << "\n"
              << "graph relationships:   " << result.report.graph_relationships
              << "\n"
              << "total ms:              " << result.report.total_ms << "\n"
              << "report written to:     " << args.report_path << "\n";
    return 0;
}

struct GenerateCommon {
    std::string out_dir;
    std::string truth_path;
    std::uint64_t seed{1};
    std::string server{"srv1"};
    std::string database;
    int events_per_file{100000};
    bool full_truth{false};
    // plan-carrying variant
    bool plan_variant{false};
    double plan_factor{9.0};
    double plan_fraction{1.0};
    // event buffer simulation
    std::int64_t buffer_bytes{0};
    double drain_rate{0.0};
};

int write_workload(provtrace::GeneratedWorkload workload,
                   const GenerateCommon& common) {
    std::vector<provtrace::QueryEvent> events = std::move(workload.events);
    if (common.plan_variant) {
        provtrace::PlanVariantParams plan;
        plan.bytes_factor = common.plan_factor;
        plan.events_fraction = common.plan_fraction;
        events = provtrace::gen_plan_variant(events, plan, common.seed);
    }
    if (common.buffer_bytes > 0) {
        events = provtrace::simulate_event_buffer(
            std::move(events), common.buffer_bytes, common.drain_rate);
    }
    provtrace::write_log(events, common.out_dir, common.events_per_file);

    const std::string truth_path = common.truth_path.empty()
                                       ? (fs::path(common.out_dir) /
                                          "ground-truth.json")
                                             .string()
                                       : common.truth_path;
    workload.truth.save(truth_path);

    std::cout << "events written:  " << events.size() << "\n"
              << "log bytes:       " << provtrace::log_bytes(events) << "\n"
              << "log directory:   " << common.out_dir << "\n"
              << "ground truth:    " << truth_path << "\n";
    return 0;
}

provtrace::GeneratorOptions generator_options(const GenerateCommon& common) {
    provtrace::GeneratorOptions opts;
    opts.seed = common.seed;
    opts.server = common.server;
    opts.database = common.database;
    opts.force_full_truth = common.full_truth;
    return opts;
}

int run_validate_cmd(const std::string& input) {
    // Accepts a file-sink directory of batch-*.json or a single batch file.
    std::vector<fs::path> files;
    if (fs::is_directory(input)) {
        for (const auto& entry : fs::directory_iterator(input)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("batch-", 0) == 0 &&
                entry.path().extension() == ".json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
    } else {
        files.emplace_back(input);
    }
    if (files.empty()) {
        std::cerr << "no batch files under " << input << "\n";
        return 1;
    }

    std::map<std::string, std::string> entity_types; // guid -> typeName
    std::map<std::string, std::string> entity_names; // guid -> qualifiedName
    std::set<std::string> names_seen;
    std::vector<json> relationships;
    std::size_t issues = 0;

    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) {
            std::cerr << "cannot read " << file << "\n";
            return 1;
        }
        json doc = json::parse(in, nullptr, false);
        if (doc.is_discarded()) {
            std::cerr << file << ": not valid JSON\n";
            return 1;
        }
        const std::string kind = doc.value("kind", "");
        for (const auto& item : doc.value("items", json::array())) {
            if (kind == "entities") {
                const std::string guid = item.value("guid", "");
                const std::string qn =
                    item.value("attributes", json::object())
                        .value("qualifiedName", "");
                entity_types[guid] = item.value("typeName", "");
                entity_names[guid] = qn;
                if (!names_seen.insert(qn).second) {
                    std::cout << "duplicate qualified name: " << qn << "\n";
                    ++issues;
                }
            } else if (kind == "relationships") {
                relationships.push_back(item);
            }
        }
    }

    std::set<std::array<std::string, 3>> rel_seen;
    for (const auto& rel : relationships) {
        const std::string type = rel.value("typeName", "");
        const std::string from = rel.value("end1", json::object()).value("guid", "");
        const std::string to = rel.value("end2", json::object()).value("guid", "");
        if (!entity_types.count(from) || !entity_types.count(to)) {
            std::cout << "dangling " << type << " relationship\n";
            ++issues;
        }
        if (!rel_seen.insert({type, from, to}).second) {
            std::cout << "duplicate relationship: " << type << "\n";
            ++issues;
        }
    }

    std::cout << "entities:      " << entity_types.size() << "\n"
              << "relationships: " << relationships.size() << "\n"
              << "issues:        " << issues << "\n";
    return issues == 0 ? 0 : 2;
}

int run_report_cmd(const std::string& path) {
    provtrace::RunReport report = provtrace::RunReport::load(path);
    auto row = [](const char* name, double ms) {
        std::printf("  %-22s %10.2f ms\n", name, ms);
    };
    std::printf("stage wall times:\n");
    row("log read", report.log_read_ms);
    row("log parse", report.log_parse_ms);
    row("group/sort", report.group_sort_ms);
    row("tree build", report.tree_build_ms);
    row("filters", report.filter_ms);
    row("runtime extract", report.runtime_extract_ms);
    row("provenance extract", report.provenance_extract_ms);
    row("stitch", report.stitch_ms);
    row("aggregate", report.aggregate_ms);
    row("compile", report.compile_ms);
    row("upload", report.upload_ms);
    row("finalize", report.finalize_ms);
    std::printf("  %-22s %10.2f ms\n", "total", report.total_ms);
    std::printf("counts:\n");
    std::printf("  events read          %10llu\n",
                static_cast<unsigned long long>(report.events_read));
    std::printf("  activities processed %10llu\n",
                static_cast<unsigned long long>(report.activities_processed));
    std::printf("  activities filtered  %10llu\n",
                static_cast<unsigned long long>(report.activities_filtered));
    std::printf("  activities errored   %10llu\n",
                static_cast<unsigned long long>(report.activities_errored));
    std::printf("  statements analyzed  %10llu\n",
                static_cast<unsigned long long>(report.statements_analyzed));
    std::printf("  graph entities       %10llu\n",
                static_cast<unsigned long long>(report.graph_entities));
    std::printf("  graph relationships  %10llu\n",
                static_cast<unsigned long long>(report.graph_relationships));
    if (!report.diagnostics.empty()) {
        std::printf("diagnostics (%zu):\n", report.diagnostics.size());
        for (std::size_t i = 0; i < std::min<std::size_t>(20, report.diagnostics.size());
             ++i) {
            std::printf("  [%s] %s\n", report.diagnostics[i].context.c_str(),
                        report.diagnostics[i].message.c_str());
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"provtrace: provenance graph extraction from query event logs"};
    app.require_subcommand(1);

    // ---- extract ----
    ExtractArgs extract_args;
    CLI::App* extract = app.add_subcommand(
        "extract", "Run the extraction pipeline over a log directory");
    extract
        ->add_option("--config", extract_args.config_path, "Config file path")
        ->required()
        ->envname("PROVTRACE_CONFIG");
    extract->add_option("--source", extract_args.source,
                        "Log directory (overrides [source] log_dir)")
        ->envname("PROVTRACE_SOURCE");
    extract->add_option("--checkpoint", extract_args.checkpoint,
                        "Checkpoint file (overrides config)")
        ->envname("PROVTRACE_CHECKPOINT");
    extract->add_option("--state", extract_args.state,
                        "Catalog snapshot file (overrides config)")
        ->envname("PROVTRACE_STATE");
    extract->add_option("--sink", extract_args.sink,
                        "Upload sink: directory or http endpoint")
        ->envname("PROVTRACE_SINK");
    extract->add_option("--batch-size", extract_args.batch_size,
                        "Upload batch size (overrides config)");
    extract->add_option("--target-format", extract_args.target_format,
                        "atlas_json or openlineage_json");
    extract->add_option("--report", extract_args.report_path,
                        "Run report output path");
    extract->add_option("--loop-iters", extract_args.loop_iters,
                        "Loop iterations admitted (int or 'inf')");
    extract->add_option("--sp-runs", extract_args.sp_runs,
                        "Runs admitted per interesting query (int or 'inf')");
    extract->add_option("--now-us", extract_args.now_us,
                        "Run start timestamp in microseconds (testing)");

    // ---- generate ----
    CLI::App* generate =
        app.add_subcommand("generate", "Emit a synthetic event log");
    generate->require_subcommand(1);

    GenerateCommon running_common;
    provtrace::RunningExampleParams running_params;
    CLI::App* running = generate->add_subcommand(
        "running-example", "Two-procedure sales ingestion workflow");
    running->add_option("--out", running_common.out_dir, "Output log directory")
        ->required();
    running->add_option("--version", running_params.version,
                        "Branch selector (1 or 2)");
    running->add_option("--repeats", running_params.repeats,
                        "Number of activities");
    running->add_option("--seed", running_common.seed, "Generator seed");
    running->add_option("--server", running_common.server, "Server name");
    running->add_option("--database", running_common.database, "Database name");
    running->add_option("--truth", running_common.truth_path,
                        "Ground truth output path");
    running->add_flag("--full-truth", running_common.full_truth,
                      "Force the full expected graph into the ground truth");
    running->add_flag("--plan", running_common.plan_variant,
                      "Emit the plan-carrying variant");
    running->add_option("--plan-factor", running_common.plan_factor,
                        "Plan payload bytes factor");
    running->add_option("--plan-fraction", running_common.plan_fraction,
                        "Fraction of statement completions with plan events");
    running->add_option("--buffer-bytes", running_common.buffer_bytes,
                        "Simulate a bounded event buffer of this size");
    running->add_option("--drain-rate", running_common.drain_rate,
                        "Buffer drain rate in bytes/second");
    running->add_option("--events-per-file", running_common.events_per_file,
                        "Log file roll size");

    GenerateCommon oltp_common;
    provtrace::OltpParams oltp_params;
    CLI::App* oltp = generate->add_subcommand(
        "oltp", "Transactional stored-procedure load");
    oltp->add_option("--out", oltp_common.out_dir, "Output log directory")
        ->required();
    oltp->add_option("--transactions", oltp_params.transactions,
                     "Number of transactions");
    oltp->add_option("--clients", oltp_params.clients,
                     "Interleaved client streams");
    oltp->add_option("--sp-count", oltp_params.sp_count,
                     "Distinct stored procedures");
    oltp->add_option("--loop-iters", oltp_params.loop_iters,
                     "Loop iterations per transaction");
    oltp->add_option("--stmts-per-tx", oltp_params.stmts_per_tx,
                     "Statements per transaction");
    oltp->add_flag("--schema-setup,!--no-schema-setup", oltp_params.schema_setup,
                   "Emit the schema creation activity");
    oltp->add_option("--seed", oltp_common.seed, "Generator seed");
    oltp->add_option("--server", oltp_common.server, "Server name");
    oltp->add_option("--database", oltp_common.database, "Database name");
    oltp->add_option("--truth", oltp_common.truth_path,
                     "Ground truth output path");
    oltp->add_flag("--full-truth", oltp_common.full_truth,
                   "Force the full expected graph into the ground truth");
    oltp->add_flag("--plan", oltp_common.plan_variant,
                   "Emit the plan-carrying variant");
    oltp->add_option("--plan-factor", oltp_common.plan_factor,
                     "Plan payload bytes factor");
    oltp->add_option("--plan-fraction", oltp_common.plan_fraction,
                     "Fraction of statement completions with plan events");
    oltp->add_option("--buffer-bytes", oltp_common.buffer_bytes,
                     "Simulate a bounded event buffer of this size");
    oltp->add_option("--drain-rate", oltp_common.drain_rate,
                     "Buffer drain rate in bytes/second");
    oltp->add_option("--events-per-file", oltp_common.events_per_file,
                     "Log file roll size");

    // ---- validate ----
    std::string validate_input;
    CLI::App* validate_cmd = app.add_subcommand(
        "validate", "Check compiled batches for integrity violations");
    validate_cmd->add_option("--input", validate_input,
                             "File sink directory or one batch file")
        ->required();

    // ---- report ----
    std::string report_path{"run-report.json"};
    CLI::App* report_cmd =
        app.add_subcommand("report", "Pretty-print a run report");
    report_cmd->add_option("--report", report_path, "Run report path");

    // ---- config ----
    CLI::App* config_cmd = app.add_subcommand(
        "config", "Print the default configuration (production profile)");

    try {
        app.parse(argc, argv);

        if (extract->parsed()) return run_extract_cmd(extract_args);
        if (running->parsed()) {
            return write_workload(provtrace::gen_running_example(
                                      running_params,
                                      generator_options(running_common)),
                                  running_common);
        }
        if (oltp->parsed()) {
            return write_workload(
                provtrace::gen_oltp(oltp_params, generator_options(oltp_common)),
                oltp_common);
        }
        if (validate_cmd->parsed()) return run_validate_cmd(validate_input);
        if (report_cmd->parsed()) return run_report_cmd(report_path);
        if (config_cmd->parsed()) {
            std::cout << provtrace::Config{}.dump();
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const provtrace::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
