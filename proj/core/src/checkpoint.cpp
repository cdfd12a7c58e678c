#include "provtrace/checkpoint.hpp"

#include "provtrace/errors.hpp"
#include "provtrace/hash.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace provtrace {

using json = nlohmann::json;

std::string checkpoint_to_json(const Checkpoint& cp) {
    // Sort entries so the file is deterministic.
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& [id, fps] : cp.processed) {
        for (std::uint64_t fp : fps) entries.emplace_back(id, to_hex(fp));
    }
    std::sort(entries.begin(), entries.end());

    json out;
    out["last_run_start"] = cp.last_run_start;
    json processed = json::array();
    for (const auto& [id, fp] : entries) {
        processed.push_back(json::array({id, fp}));
    }
    out["processed"] = std::move(processed);
    return out.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !j.contains("last_run_start") ||
        !j.contains("processed") || !j["processed"].is_array()) {
        throw CorruptCheckpoint("checkpoint file is not decodable");
    }
    Checkpoint cp;
    if (!j["last_run_start"].is_number_integer()) {
        throw CorruptCheckpoint("last_run_start is not an integer");
    }
    cp.last_run_start = j["last_run_start"].get<std::int64_t>();
    for (const auto& entry : j["processed"]) {
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() ||
            !entry[1].is_string()) {
            throw CorruptCheckpoint("bad processed entry");
        }
        std::uint64_t fp = 0;
        const std::string hex = entry[1].get<std::string>();
        if (hex.empty() || hex.size() > 16) throw CorruptCheckpoint("bad fingerprint");
        for (char c : hex) {
            int digit;
            if (c >= '0' && c <= '9') digit = c - '0';
            else if (c >= 'a' && c <= 'f') digit = c - 'a' + 10;
            else throw CorruptCheckpoint("bad fingerprint digit");
            fp = (fp << 4) | static_cast<std::uint64_t>(digit);
        }
        cp.record(entry[0].get<std::string>(), fp);
    }
    return cp;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return Checkpoint{}; // missing file -> empty checkpoint
    std::stringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_json(buf.str());
}

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
    const std::string tmp_name = path.string() + ".tmp";
    {
        std::ofstream out(tmp_name, std::ios::trunc);
        if (!out) throw SourceUnavailable("cannot write checkpoint: " + path.string());
        out << checkpoint_to_json(cp) << "\n";
    }
    std::filesystem::rename(tmp_name, path);
}

} // namespace provtrace
