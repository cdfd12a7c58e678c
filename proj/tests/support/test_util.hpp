#pragma once

#include "provtrace/event.hpp"
#include "provtrace/query_tree.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace provtrace::testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("provtrace-" + tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }
    std::filesystem::path operator/(const std::string& name) const {
        return path_ / name;
    }

private:
    std::filesystem::path path_;
};

inline QueryEvent make_event(std::string activity, std::uint64_t seq,
                             EventKind kind, EventClass klass, std::int64_t ts,
                             std::string text = {}) {
    QueryEvent e;
    e.activity_id = std::move(activity);
    e.seq = seq;
    e.kind = kind;
    e.klass = klass;
    e.ts = ts;
    e.metadata.username = "u1";
    e.metadata.client_app_name = "app";
    e.metadata.client_host = "host";
    e.metadata.server_name = "srv";
    e.metadata.database_name = "db";
    if (kind == EventKind::Started) {
        e.query_text = text.empty() ? "SELECT 1" : std::move(text);
    } else {
        e.metadata.cpu_time_us = 10;
        e.metadata.duration_us = 20;
        if (!text.empty()) e.query_text = std::move(text);
    }
    return e;
}

// Balanced random event sequences: fanout <= max_fanout, depth <=
// max_depth. Texts are distinct per node unless a pool is given.
struct RandomTreeGen {
    std::mt19937_64 rng;
    int max_depth{6};
    int max_fanout{5};
    std::vector<std::string> text_pool;

    explicit RandomTreeGen(std::uint64_t seed) : rng(seed) {}

    Activity generate(const std::string& activity_id) {
        Activity a;
        a.activity_id = activity_id;
        std::int64_t ts = 1000;
        std::uint64_t seq = 0;
        int serial = 0;
        emit(a, 1, ts, seq, serial);
        return a;
    }

private:
    std::string text_for(int serial) {
        if (!text_pool.empty()) return text_pool[rng() % text_pool.size()];
        return "SELECT col" + std::to_string(serial) + " FROM t" +
               std::to_string(serial);
    }

    void emit(Activity& a, int depth, std::int64_t& ts, std::uint64_t& seq,
              int& serial) {
        const int my_serial = serial++;
        a.events.push_back(make_event(a.activity_id, seq, EventKind::Started,
                                      depth == 1 ? EventClass::SqlBatch
                                                 : EventClass::SpStatement,
                                      ts, text_for(my_serial)));
        ++seq;
        ts += 1 + static_cast<std::int64_t>(rng() % 5);
        if (depth < max_depth) {
            const int children = static_cast<int>(rng() % (max_fanout + 1));
            // thin out deep levels so trees stay small
            for (int i = 0; i < children; ++i) {
                if (depth >= 2 && (rng() % (depth + 1)) != 0) continue;
                emit(a, depth + 1, ts, seq, serial);
            }
        }
        a.events.push_back(make_event(a.activity_id, seq,
                                      EventKind::Completed,
                                      depth == 1 ? EventClass::SqlBatch
                                                 : EventClass::SpStatement,
                                      ts));
        ++seq;
        ts += 1 + static_cast<std::int64_t>(rng() % 5);
    }
};

inline void write_lines(const std::filesystem::path& path,
                        const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::trunc);
    for (const auto& line : lines) out << line << "\n";
}

} // namespace provtrace::testutil
