#include "provtrace/event.hpp"

#include "provtrace/errors.hpp"

#include <nlohmann/json.hpp>

#include <array>

namespace provtrace {

using json = nlohmann::json;

std::string_view to_string(EventKind kind) {
    return kind == EventKind::Started ? "started" : "completed";
}

std::string_view to_string(EventClass klass) {
    switch (klass) {
    case EventClass::SqlBatch: return "sql_batch";
    case EventClass::SqlStatement: return "sql_statement";
    case EventClass::SpStatement: return "sp_statement";
    }
    return "sql_statement";
}

EventKind event_kind_from(std::string_view s) {
    if (s == "started") return EventKind::Started;
    if (s == "completed") return EventKind::Completed;
    throw MalformedRecord("unknown event kind: " + std::string(s));
}

EventClass event_class_from(std::string_view s) {
    if (s == "sql_batch") return EventClass::SqlBatch;
    if (s == "sql_statement") return EventClass::SqlStatement;
    if (s == "sp_statement") return EventClass::SpStatement;
    throw MalformedRecord("unknown event class: " + std::string(s));
}

namespace {

// Known top-level keys; everything else lands in extras.
constexpr std::array<std::string_view, 18> kKnownKeys = {
    "activity_id", "seq",          "kind",          "class",
    "ts",          "query_text",   "username",      "client_app_name",
    "client_host", "server_name",  "database_name", "cpu_time_us",
    "duration_us", "rows_inserted", "rows_updated", "rows_deleted",
    "rows_returned", "plan_payload",
};

bool is_known_key(std::string_view key) {
    for (auto k : kKnownKeys) {
        if (k == key) return true;
    }
    return false;
}

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? nullptr : &*it;
}

std::string require_string(const json& j, const char* key) {
    const json* v = find(j, key);
    if (!v) throw MalformedRecord(std::string("missing required field: ") + key);
    if (!v->is_string()) throw MalformedRecord(std::string("field is not a string: ") + key);
    return v->get<std::string>();
}

std::int64_t require_int(const json& j, const char* key) {
    const json* v = find(j, key);
    if (!v) throw MalformedRecord(std::string("missing required field: ") + key);
    if (!v->is_number_integer() && !v->is_number_unsigned())
        throw MalformedRecord(std::string("field is not an integer: ") + key);
    return v->get<std::int64_t>();
}

std::optional<std::int64_t> opt_int(const json& j, const char* key) {
    const json* v = find(j, key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer() && !v->is_number_unsigned())
        throw MalformedRecord(std::string("field is not an integer: ") + key);
    return v->get<std::int64_t>();
}

std::string opt_string(const json& j, const char* key) {
    const json* v = find(j, key);
    if (!v) return {};
    if (!v->is_string()) throw MalformedRecord(std::string("field is not a string: ") + key);
    return v->get<std::string>();
}

void append_json_string(std::string& out, std::string_view s) {
    out.push_back('"');
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                out += buf;
            } else {
                out.push_back(c);
            }
        }
    }
    out.push_back('"');
}

void append_field(std::string& out, const char* key, std::string_view value,
                  bool& first) {
    if (!first) out.push_back(',');
    first = false;
    append_json_string(out, key);
    out.push_back(':');
    append_json_string(out, value);
}

void append_field(std::string& out, const char* key, std::int64_t value,
                  bool& first) {
    if (!first) out.push_back(',');
    first = false;
    append_json_string(out, key);
    out.push_back(':');
    out += std::to_string(value);
}

} // namespace

QueryEvent parse_event_line(std::string_view line) {
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
        throw MalformedRecord("line is not a JSON object");
    }

    QueryEvent e;
    e.activity_id = require_string(j, "activity_id");
    std::int64_t seq = require_int(j, "seq");
    if (seq < 0) throw InvariantViolation("seq must be non-negative");
    e.seq = static_cast<std::uint64_t>(seq);
    e.kind = event_kind_from(require_string(j, "kind"));
    e.klass = event_class_from(require_string(j, "class"));
    e.ts = require_int(j, "ts");
    e.query_text = opt_string(j, "query_text");

    auto& m = e.metadata;
    m.username = opt_string(j, "username");
    m.client_app_name = opt_string(j, "client_app_name");
    m.client_host = opt_string(j, "client_host");
    m.server_name = opt_string(j, "server_name");
    m.database_name = opt_string(j, "database_name");
    m.cpu_time_us = opt_int(j, "cpu_time_us");
    m.duration_us = opt_int(j, "duration_us");
    m.rows_inserted = opt_int(j, "rows_inserted");
    m.rows_updated = opt_int(j, "rows_updated");
    m.rows_deleted = opt_int(j, "rows_deleted");
    m.rows_returned = opt_int(j, "rows_returned");

    if (const json* v = find(j, "plan_payload")) {
        if (!v->is_string()) throw MalformedRecord("plan_payload is not a string");
        e.plan_payload = v->get<std::string>();
    }

    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!is_known_key(it.key())) {
            e.extras[it.key()] = it.value().dump();
        }
    }

    validate_event(e);
    return e;
}

void validate_event(const QueryEvent& e) {
    std::string violations;
    auto add = [&violations](std::string_view clause) {
        if (!violations.empty()) violations += "; ";
        violations += clause;
    };

    if (e.kind == EventKind::Started && e.query_text.empty()) {
        add("started event must carry non-empty query_text");
    }
    if (e.kind == EventKind::Completed) {
        if (!e.metadata.cpu_time_us) add("completed event missing cpu_time_us");
        if (!e.metadata.duration_us) add("completed event missing duration_us");
    }
    auto non_negative = [&add](const std::optional<std::int64_t>& v,
                               std::string_view name) {
        if (v && *v < 0) {
            add(std::string(name) + " must be non-negative");
        }
    };
    non_negative(e.metadata.cpu_time_us, "cpu_time_us");
    non_negative(e.metadata.duration_us, "duration_us");
    non_negative(e.metadata.rows_inserted, "rows_inserted");
    non_negative(e.metadata.rows_updated, "rows_updated");
    non_negative(e.metadata.rows_deleted, "rows_deleted");
    non_negative(e.metadata.rows_returned, "rows_returned");

    if (!violations.empty()) throw InvariantViolation(violations);
}

std::string serialize_event(const QueryEvent& e) {
    validate_event(e);

    // Hand-rolled writer with a fixed key order; this runs on the hot
    // generator path and keys never need escaping.
    std::string out;
    out.reserve(128 + e.query_text.size() +
                (e.plan_payload ? e.plan_payload->size() + 16 : 0));
    out.push_back('{');
    bool first = true;
    append_field(out, "activity_id", e.activity_id, first);
    append_field(out, "seq", static_cast<std::int64_t>(e.seq), first);
    append_field(out, "kind", to_string(e.kind), first);
    append_field(out, "class", to_string(e.klass), first);
    append_field(out, "ts", e.ts, first);
    if (!e.query_text.empty()) append_field(out, "query_text", e.query_text, first);

    const auto& m = e.metadata;
    if (!m.username.empty()) append_field(out, "username", m.username, first);
    if (!m.client_app_name.empty())
        append_field(out, "client_app_name", m.client_app_name, first);
    if (!m.client_host.empty()) append_field(out, "client_host", m.client_host, first);
    if (!m.server_name.empty()) append_field(out, "server_name", m.server_name, first);
    if (!m.database_name.empty())
        append_field(out, "database_name", m.database_name, first);
    auto int_field = [&out, &first](const char* key,
                                    const std::optional<std::int64_t>& v) {
        if (v) append_field(out, key, *v, first);
    };
    int_field("cpu_time_us", m.cpu_time_us);
    int_field("duration_us", m.duration_us);
    int_field("rows_inserted", m.rows_inserted);
    int_field("rows_updated", m.rows_updated);
    int_field("rows_deleted", m.rows_deleted);
    int_field("rows_returned", m.rows_returned);
    if (e.plan_payload) append_field(out, "plan_payload", *e.plan_payload, first);

    for (const auto& [key, raw] : e.extras) {
        if (!first) out.push_back(',');
        first = false;
        append_json_string(out, key);
        out.push_back(':');
        out += raw; // raw JSON value text, stored verbatim at parse time
    }
    out.push_back('}');
    return out;
}

std::string log_file_name(int partition, std::uint64_t first_seq) {
    return "events-" + std::to_string(partition) + "-" +
           std::to_string(first_seq) + ".ndjson";
}

} // namespace provtrace
