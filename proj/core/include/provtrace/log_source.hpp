#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace provtrace {

// A readable set of NDJSON log files. The artifact reads from the local
// filesystem or from memory (tests, generators); remote blob stores are
// out of scope but would slot in behind this interface.
class LogSource {
public:
    virtual ~LogSource() = default;

    // Stable, sorted list of file names.
    virtual std::vector<std::string> list_files() const = 0;

    // Invokes fn once per line (newline stripped). Throws
    // SourceUnavailable if the file cannot be read.
    virtual void for_each_line(
        const std::string& file,
        const std::function<void(std::string_view)>& fn) const = 0;

    // Total payload size, used for stage accounting.
    virtual std::uint64_t total_bytes() const = 0;
};

class DirectoryLogSource final : public LogSource {
public:
    explicit DirectoryLogSource(std::filesystem::path dir);

    std::vector<std::string> list_files() const override;
    void for_each_line(
        const std::string& file,
        const std::function<void(std::string_view)>& fn) const override;
    std::uint64_t total_bytes() const override;

private:
    std::filesystem::path dir_;
};

class MemoryLogSource final : public LogSource {
public:
    void add_file(std::string name, std::vector<std::string> lines);

    std::vector<std::string> list_files() const override;
    void for_each_line(
        const std::string& file,
        const std::function<void(std::string_view)>& fn) const override;
    std::uint64_t total_bytes() const override;

private:
    std::map<std::string, std::vector<std::string>> files_;
};

} // namespace provtrace
