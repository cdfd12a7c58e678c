#pragma once

#include "provtrace/graph.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

namespace provtrace {

enum class TargetFormat { AtlasJson, OpenLineageJson };

TargetFormat target_format_from(std::string_view name);
std::string_view to_string(TargetFormat format);

// One logical document of the compiled output: an array of entity
// definitions, relationship definitions, or run events.
struct CompiledDoc {
    std::string kind; // "entities" | "relationships" | "run_events"
    nlohmann::json items; // array
};

// Compiles the graph to the target model with deterministic ordering
// (sorted by qualified name). Throws ValidationFailure when the graph
// does not validate.
std::vector<CompiledDoc> compile_graph(const ProvenanceGraph& g,
                                       TargetFormat format);

struct UploadBatch {
    std::size_t id{};
    std::string kind;
    nlohmann::json items; // array, size <= batch_size
};

// Splits documents into delivery batches. Entity batches precede
// relationship batches, so no relationship is sent before both its
// endpoints' entities.
std::vector<UploadBatch> partition_batches(const std::vector<CompiledDoc>& docs,
                                           int batch_size);

// Where batches go.
class Sink {
public:
    virtual ~Sink() = default;
    // True on success; on failure fills `error`.
    virtual bool deliver(const UploadBatch& batch, std::string* error) = 0;
};

// One JSON file per batch, named batch-<n>.json.
class FileSink final : public Sink {
public:
    explicit FileSink(std::filesystem::path dir);
    bool deliver(const UploadBatch& batch, std::string* error) override;

private:
    std::filesystem::path dir_;
};

// POST <endpoint>/entities/bulk per batch; success = 2xx.
class HttpSink final : public Sink {
public:
    explicit HttpSink(std::string endpoint);
    ~HttpSink() override;
    bool deliver(const UploadBatch& batch, std::string* error) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// File path or http(s) URL.
std::unique_ptr<Sink> open_sink(const std::string& target);

struct UploadCheckpoint {
    // Identifies the compiled graph the progress belongs to; progress for
    // a different graph is discarded rather than resumed.
    std::string graph_tag;
    std::set<std::size_t> delivered;
};

UploadCheckpoint load_upload_checkpoint(const std::filesystem::path& path);
void save_upload_checkpoint(const UploadCheckpoint& cp,
                            const std::filesystem::path& path);

struct UploadOptions {
    int max_attempts = 5;
    int base_delay_ms = 1000;
    double backoff_factor = 2.0;
    // Identifies the compiled graph; see UploadCheckpoint::graph_tag.
    std::string graph_tag;
    // Injected for tests; defaults to an actual sleep.
    std::function<void(int /*delay_ms*/)> sleeper;
};

struct UploadReport {
    std::vector<std::size_t> delivered;
    std::vector<std::size_t> skipped; // already in the checkpoint
    std::vector<std::size_t> failed;
    std::vector<std::string> attempt_log;
};

// Delivers batches sequentially, recording progress in the checkpoint
// file after every batch so a crashed run resumes where it stopped.
// Retries with exponential backoff; throws SinkUnavailable once a batch
// exhausts its attempts (checkpoint preserved).
UploadReport upload(Sink& sink, const std::vector<UploadBatch>& batches,
                    const std::filesystem::path& checkpoint_path,
                    const UploadOptions& opts = {});

} // namespace provtrace
