#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace provtrace {

// Run checkpoint: activities are processed exactly once across repeated
// runs over a growing log. `processed` maps activity id to the set of
// event-list fingerprints already handled; fingerprints are rolling
// hashes over the (ts, seq) prefix, so appended events for a reused id
// only reprocess the new suffix.
struct Checkpoint {
    std::int64_t last_run_start{0}; // monotone, never decreases
    std::unordered_map<std::string, std::unordered_set<std::uint64_t>> processed;

    bool contains(const std::string& activity_id, std::uint64_t fingerprint) const {
        auto it = processed.find(activity_id);
        return it != processed.end() && it->second.count(fingerprint) > 0;
    }

    void record(const std::string& activity_id, std::uint64_t fingerprint) {
        processed[activity_id].insert(fingerprint);
    }
};

// JSON round trip: { "last_run_start": int, "processed": [[id, fp], ...] }
// with fingerprints as 16-digit hex strings. Loading a missing file
// yields the empty checkpoint; a file that exists but cannot be decoded
// raises CorruptCheckpoint (refuse to run rather than double-process).
Checkpoint load_checkpoint(const std::filesystem::path& path);
void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path);

std::string checkpoint_to_json(const Checkpoint& cp);
Checkpoint checkpoint_from_json(const std::string& text);

} // namespace provtrace
