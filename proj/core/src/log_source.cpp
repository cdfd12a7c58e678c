#include "provtrace/log_source.hpp"

#include "provtrace/errors.hpp"

#include <algorithm>
#include <fstream>

namespace provtrace {

namespace fs = std::filesystem;

DirectoryLogSource::DirectoryLogSource(fs::path dir) : dir_(std::move(dir)) {}

std::vector<std::string> DirectoryLogSource::list_files() const {
    std::error_code ec;
    if (!fs::is_directory(dir_, ec)) {
        throw SourceUnavailable("log directory not readable: " + dir_.string());
    }
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ndjson") {
            out.push_back(entry.path().filename().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void DirectoryLogSource::for_each_line(
    const std::string& file,
    const std::function<void(std::string_view)>& fn) const {
    std::ifstream in(dir_ / file);
    if (!in) {
        throw SourceUnavailable("cannot open log file: " + (dir_ / file).string());
    }
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        fn(line);
    }
}

std::uint64_t DirectoryLogSource::total_bytes() const {
    std::uint64_t total = 0;
    for (const auto& name : list_files()) {
        std::error_code ec;
        total += fs::file_size(dir_ / name, ec);
    }
    return total;
}

void MemoryLogSource::add_file(std::string name, std::vector<std::string> lines) {
    files_[std::move(name)] = std::move(lines);
}

std::vector<std::string> MemoryLogSource::list_files() const {
    std::vector<std::string> out;
    out.reserve(files_.size());
    for (const auto& [name, _] : files_) out.push_back(name);
    return out;
}

void MemoryLogSource::for_each_line(
    const std::string& file,
    const std::function<void(std::string_view)>& fn) const {
    auto it = files_.find(file);
    if (it == files_.end()) {
        throw SourceUnavailable("no such in-memory file: " + file);
    }
    for (const auto& line : it->second) fn(line);
}

std::uint64_t MemoryLogSource::total_bytes() const {
    std::uint64_t total = 0;
    for (const auto& [_, lines] : files_) {
        for (const auto& line : lines) total += line.size() + 1;
    }
    return total;
}

} // namespace provtrace
