#pragma once

#include "provtrace/filters.hpp"
#include "provtrace/sql_analyzer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace provtrace {

// Run configuration: a sectioned key/value file ([source], [filters],
// [binding], [uploader]) with string/int/float/bool/string-array values.
// Defaults are the production profile: strictest loop compression and
// run admission, built-in uninteresting-query patterns, all aggregation
// levels emitted, event dropping off.
struct Config {
    // [source]
    std::string log_dir;
    std::string checkpoint_path{"checkpoint.json"};
    std::string state_path{"catalog-state.json"};
    double staleness_hours{24.0};
    // Informational: production schedules runs this often; the CLI runs
    // on demand and the period only shapes checkpoint expectations.
    int period_hours{6};
    bool fig6_strict_subtree{false};

    // [filters]
    std::optional<int> loop_iters_admitted{1};
    std::optional<int> sp_runs_admitted{1};
    bool keep_context{false};
    bool use_builtin_patterns{true};
    std::vector<std::string> extra_patterns;   // "route|kind|pattern"
    std::vector<std::string> drop_activity_if; // "any: expr" / "all: expr"
    std::vector<std::string> emit_levels{"statement", "batch", "procedure"};

    // [binding]
    std::string binding_mode{"state_based"};
    bool include_control_columns{false};

    // [uploader]
    std::string sink;
    int batch_size{100};
    std::string target_format{"atlas_json"};
    std::string upload_checkpoint_path{"upload-checkpoint.json"};
    int retry_base_ms{1000};
    int retry_max_attempts{5};
    double retry_factor{2.0};

    static Config parse(const std::string& text); // throws ConfigError
    static Config load(const std::filesystem::path& path);
    std::string dump() const; // canonical form; parse(dump()) round-trips

    // Compiled views (throw ConfigError on bad patterns/predicates).
    FilterConfig filter_config() const;
    sql::BindingMode mode() const;
    sql::AnalyzerOptions analyzer_options() const;
};

} // namespace provtrace
