#pragma once

#include "provtrace/checkpoint.hpp"
#include "provtrace/log_source.hpp"
#include "provtrace/query_tree.hpp"
#include "provtrace/stage_clock.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace provtrace {

struct CollectorOptions {
    // Activities may span multiple runs; unfinished ones are deferred
    // until this horizon, after which they are reported as malformed.
    std::int64_t staleness_horizon_us = 24ll * 3600 * 1000 * 1000;
};

struct Diagnostic {
    std::string context; // file:line or activity id
    std::string message;
};

struct CollectResult {
    // Complete, not-yet-processed activities, sorted by trigger time.
    std::vector<Activity> activities;
    // Input checkpoint plus this run's recordings; persist only after the
    // run succeeds.
    Checkpoint updated;
    std::vector<Diagnostic> diagnostics;
    std::uint64_t events_read{0};
    std::uint64_t bytes_read{0};
    std::uint64_t activities_deferred{0};
};

// Reads every log file, groups events by activity id, and yields each
// complete activity exactly once across repeated invocations over the
// same growing log:
//   - an activity is yielded iff it has at least one event newer than
//     cp.last_run_start and its fingerprint is not already recorded;
//   - unbalanced activities are deferred (yielded by a later run once
//     their remaining events arrive) until the staleness horizon;
//   - structurally hopeless activities are skipped with a diagnostic and
//     recorded so they are not retried.
//
// Throws SourceUnavailable, and MalformedRecord with file/line context on
// undecodable lines. Single sequential reader; safe to run build steps on
// the yielded activities concurrently.
CollectResult collect(const LogSource& source, const Checkpoint& cp,
                      std::int64_t now_us, const CollectorOptions& opts = {},
                      StageClock* clock = nullptr);

} // namespace provtrace
