#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace provtrace {

enum class EventKind { Started, Completed };

// Whether the query run is an ad-hoc statement, a statement inside a
// stored procedure, or a batch.
enum class EventClass { SqlBatch, SqlStatement, SpStatement };

std::string_view to_string(EventKind kind);
std::string_view to_string(EventClass klass);
EventKind event_kind_from(std::string_view s);
EventClass event_class_from(std::string_view s);

// Runtime metadata attached to an event. Runtime counters (CPU, duration,
// row counts) are only required on completed events.
struct EventMetadata {
    std::string username;
    std::string client_app_name;
    std::string client_host;
    std::string server_name;
    std::string database_name;
    std::optional<std::int64_t> cpu_time_us;
    std::optional<std::int64_t> duration_us;
    std::optional<std::int64_t> rows_inserted;
    std::optional<std::int64_t> rows_updated;
    std::optional<std::int64_t> rows_deleted;
    std::optional<std::int64_t> rows_returned;

    bool operator==(const EventMetadata&) const = default;
};

// One record of the query event log.
//
// Invariants:
//   - started events carry non-empty query_text
//   - completed events carry cpu_time_us and duration_us, both >= 0
//   - (ts, seq) is strictly increasing within one log file
struct QueryEvent {
    std::string activity_id;
    std::uint64_t seq{};
    EventKind kind{EventKind::Started};
    EventClass klass{EventClass::SqlStatement};
    std::int64_t ts{}; // microseconds since epoch
    std::string query_text;
    EventMetadata metadata;

    // Opaque execution-plan blob. Only present in plan-carrying logs;
    // nothing downstream ever interprets it. Events that carry it are
    // auxiliary and do not take part in dependency-tree construction.
    std::optional<std::string> plan_payload;

    // Unknown fields, key -> raw JSON value text. Preserved verbatim on
    // round trip; the metadata model is extensible.
    std::map<std::string, std::string> extras;

    bool operator==(const QueryEvent&) const = default;
};

// Parses one NDJSON line into a validated event.
// Throws MalformedRecord on bad JSON or a missing required field, and
// InvariantViolation when a field value breaks an invariant.
QueryEvent parse_event_line(std::string_view line);

// Checks every type invariant; throws InvariantViolation listing the
// violated clauses.
void validate_event(const QueryEvent& e);

// Serializes to one newline-free NDJSON line. parse_event_line is the
// exact inverse for any valid event.
std::string serialize_event(const QueryEvent& e);

// Log files are named events-<partition>-<first_seq>.ndjson.
std::string log_file_name(int partition, std::uint64_t first_seq);

} // namespace provtrace
