#include "provtrace/collector.hpp"

#include "provtrace/errors.hpp"
#include "provtrace/hash.hpp"

#include <algorithm>
#include <unordered_map>

namespace provtrace {

namespace {

// Balance of a candidate event slice, ignoring plan-payload carriers.
enum class Shape { Complete, Incomplete, Broken };

Shape scan_shape(const std::vector<QueryEvent>& events, std::size_t begin) {
    std::int64_t depth = 0;
    bool any = false;
    for (std::size_t i = begin; i < events.size(); ++i) {
        const QueryEvent& e = events[i];
        if (!is_tree_event(e)) continue;
        any = true;
        if (e.kind == EventKind::Started) {
            ++depth;
        } else {
            if (depth == 0) return Shape::Broken;
            --depth;
        }
    }
    if (!any) return Shape::Broken;
    return depth == 0 ? Shape::Complete : Shape::Incomplete;
}

} // namespace

CollectResult collect(const LogSource& source, const Checkpoint& cp,
                      std::int64_t now_us, const CollectorOptions& opts,
                      StageClock* clock) {
    CollectResult result;
    result.updated = cp;
    result.updated.last_run_start = std::max(cp.last_run_start, now_us);

    std::unordered_map<std::string, std::vector<QueryEvent>> groups;

    std::vector<std::string> lines;
    for (const auto& file : source.list_files()) {
        lines.clear();
        {
            StageTimer t(clock, Stage::LogRead);
            source.for_each_line(file, [&](std::string_view line) {
                result.bytes_read += line.size() + 1;
                lines.emplace_back(line);
            });
        }
        StageTimer t(clock, Stage::LogParse);
        std::int64_t prev_ts = INT64_MIN;
        std::uint64_t prev_seq = 0;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            QueryEvent e;
            try {
                e = parse_event_line(lines[i]);
            } catch (const Error& err) {
                throw MalformedRecord(file + ":" + std::to_string(i + 1) + ": " +
                                      err.what());
            }
            if (e.ts < prev_ts || (e.ts == prev_ts && e.seq <= prev_seq)) {
                throw MalformedRecord(file + ":" + std::to_string(i + 1) +
                                      ": events not strictly increasing in (ts, seq)");
            }
            prev_ts = e.ts;
            prev_seq = e.seq;
            ++result.events_read;
            groups[e.activity_id].push_back(std::move(e));
        }
    }

    StageTimer t(clock, Stage::GroupSort);
    for (auto& [id, events] : groups) {
        std::sort(events.begin(), events.end(),
                  [](const QueryEvent& a, const QueryEvent& b) {
                      return a.ts != b.ts ? a.ts < b.ts : a.seq < b.seq;
                  });

        // Find the longest already-processed prefix. Fingerprints are
        // rolling hashes, so a reused activity id whose earlier slice was
        // handled leaves only the new suffix as the candidate.
        std::uint64_t h = kFnv64Offset;
        std::size_t candidate_begin = 0;
        for (std::size_t i = 0; i < events.size(); ++i) {
            h = fnv1a64_mix(static_cast<std::uint64_t>(events[i].ts), h);
            h = fnv1a64_mix(events[i].seq, h);
            if (cp.contains(id, h)) candidate_begin = i + 1;
        }
        const std::uint64_t full_fingerprint = h;
        if (candidate_begin == events.size()) continue; // fully processed

        bool has_new_event = false;
        for (std::size_t i = candidate_begin; i < events.size(); ++i) {
            if (events[i].ts > cp.last_run_start) {
                has_new_event = true;
                break;
            }
        }

        switch (scan_shape(events, candidate_begin)) {
        case Shape::Broken:
            result.diagnostics.push_back(
                {id, "malformed activity: unbalanced event sequence; skipped"});
            result.updated.record(id, full_fingerprint);
            continue;
        case Shape::Incomplete: {
            const std::int64_t last_ts = events.back().ts;
            if (now_us - last_ts > opts.staleness_horizon_us) {
                result.diagnostics.push_back(
                    {id, "malformed activity: never completed within the "
                         "staleness horizon; skipped"});
                result.updated.record(id, full_fingerprint);
            } else {
                ++result.activities_deferred; // wait for the rest to arrive
            }
            continue;
        }
        case Shape::Complete:
            break;
        }

        if (!has_new_event) continue;

        Activity a;
        a.activity_id = id;
        a.events.assign(std::make_move_iterator(events.begin() + candidate_begin),
                        std::make_move_iterator(events.end()));
        result.updated.record(id, full_fingerprint);
        result.activities.push_back(std::move(a));
    }

    std::sort(result.activities.begin(), result.activities.end(),
              [](const Activity& a, const Activity& b) {
                  if (a.trigger_time() != b.trigger_time())
                      return a.trigger_time() < b.trigger_time();
                  return a.activity_id < b.activity_id;
              });
    return result;
}

} // namespace provtrace
