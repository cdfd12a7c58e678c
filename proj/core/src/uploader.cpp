#include "provtrace/uploader.hpp"

#include "provtrace/errors.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

namespace provtrace {

using json = nlohmann::json;

TargetFormat target_format_from(std::string_view name) {
    if (name == "atlas_json") return TargetFormat::AtlasJson;
    if (name == "openlineage_json") return TargetFormat::OpenLineageJson;
    throw ConfigError("unknown target format: " + std::string(name));
}

std::string_view to_string(TargetFormat format) {
    return format == TargetFormat::AtlasJson ? "atlas_json" : "openlineage_json";
}

namespace {

json attr_value_to_json(const AttrValue& v) {
    return std::visit([](const auto& value) { return json(value); }, v);
}

json entity_to_json(const Entity& e) {
    json out;
    out["typeName"] = std::string(type_name(e.type));
    out["guid"] = e.guid.str();
    json attrs;
    attrs["qualifiedName"] = e.qualified_name;
    for (const auto& [key, value] : e.attributes) {
        attrs[key] = attr_value_to_json(value);
    }
    if (e.column_mapping && !e.column_mapping->empty()) {
        json mapping = json::object();
        for (const auto& [out_col, in_cols] : *e.column_mapping) {
            json ins = json::array();
            for (const auto& col : in_cols) ins.push_back(col);
            mapping[out_col] = std::move(ins);
        }
        attrs["column_mapping"] = std::move(mapping);
    }
    out["attributes"] = std::move(attrs);
    return out;
}

std::vector<const Entity*> sorted_entities(const ProvenanceGraph& g) {
    std::vector<const Entity*> out;
    out.reserve(g.entities.size());
    for (const auto& [guid, entity] : g.entities) out.push_back(&entity);
    std::sort(out.begin(), out.end(), [](const Entity* a, const Entity* b) {
        if (a->qualified_name != b->qualified_name)
            return a->qualified_name < b->qualified_name;
        return type_name(a->type) < type_name(b->type);
    });
    return out;
}

std::vector<CompiledDoc> compile_atlas(const ProvenanceGraph& g) {
    json entities = json::array();
    for (const Entity* e : sorted_entities(g)) {
        entities.push_back(entity_to_json(*e));
    }

    struct RelRow {
        std::string type;
        std::string from_qn;
        std::string to_qn;
        const Relationship* rel;
    };
    std::vector<RelRow> rows;
    rows.reserve(g.relationships.size());
    for (const auto& rel : g.relationships) {
        const Entity* from = g.find(rel.from);
        const Entity* to = g.find(rel.to);
        rows.push_back({std::string(relationship_name(rel.type)),
                        from ? from->qualified_name : "",
                        to ? to->qualified_name : "", &rel});
    }
    std::sort(rows.begin(), rows.end(), [](const RelRow& a, const RelRow& b) {
        return std::tie(a.type, a.from_qn, a.to_qn) <
               std::tie(b.type, b.from_qn, b.to_qn);
    });

    json relationships = json::array();
    for (const auto& row : rows) {
        json r;
        r["typeName"] = row.type;
        r["end1"] = {{"guid", row.rel->from.str()}, {"qualifiedName", row.from_qn}};
        r["end2"] = {{"guid", row.rel->to.str()}, {"qualifiedName", row.to_qn}};
        relationships.push_back(std::move(r));
    }

    std::vector<CompiledDoc> docs;
    docs.push_back({"entities", std::move(entities)});
    docs.push_back({"relationships", std::move(relationships)});
    return docs;
}

std::vector<CompiledDoc> compile_openlineage(const ProvenanceGraph& g) {
    // One run event per run entity with input/output dataset facets.
    std::unordered_map<Guid, const Entity*> statics_of;
    std::unordered_map<Guid, std::vector<const Entity*>> inputs, outputs;
    for (const auto& rel : g.relationships) {
        switch (rel.type) {
        case RelationshipType::RunOf: {
            if (const Entity* s = g.find(rel.to)) statics_of[rel.from] = s;
            break;
        }
        case RelationshipType::Input: {
            if (const Entity* d = g.find(rel.from)) inputs[rel.to].push_back(d);
            break;
        }
        case RelationshipType::Output: {
            if (const Entity* d = g.find(rel.to)) outputs[rel.from].push_back(d);
            break;
        }
        default: break;
        }
    }

    auto dataset_array = [](std::vector<const Entity*> datasets) {
        std::sort(datasets.begin(), datasets.end(),
                  [](const Entity* a, const Entity* b) {
                      return a->qualified_name < b->qualified_name;
                  });
        datasets.erase(std::unique(datasets.begin(), datasets.end()),
                       datasets.end());
        json arr = json::array();
        for (const Entity* d : datasets) {
            if (d->type == EntityType::Column) continue;
            arr.push_back({{"namespace", "provtrace"},
                           {"name", d->qualified_name},
                           {"facets", json::object()}});
        }
        return arr;
    };

    json events = json::array();
    for (const Entity* e : sorted_entities(g)) {
        if (!is_run(e->type)) continue;
        json ev;
        ev["eventType"] = "COMPLETE";
        if (auto it = e->attributes.find("end_ts"); it != e->attributes.end()) {
            ev["eventTimeUs"] = attr_value_to_json(it->second);
        }
        ev["run"] = {{"runId", e->guid.str()}};
        const Entity* stat = nullptr;
        if (auto it = statics_of.find(e->guid); it != statics_of.end())
            stat = it->second;
        ev["job"] = {{"namespace", "provtrace"},
                     {"name", stat ? stat->qualified_name : e->qualified_name}};
        ev["inputs"] = dataset_array(inputs[e->guid]);
        ev["outputs"] = dataset_array(outputs[e->guid]);
        events.push_back(std::move(ev));
    }

    std::vector<CompiledDoc> docs;
    docs.push_back({"run_events", std::move(events)});
    return docs;
}

} // namespace

std::vector<CompiledDoc> compile_graph(const ProvenanceGraph& g,
                                       TargetFormat format) {
    std::vector<std::string> issues = validate(g);
    if (!issues.empty()) {
        throw ValidationFailure("graph does not validate: " + issues.front() +
                                (issues.size() > 1
                                     ? " (+" + std::to_string(issues.size() - 1) +
                                           " more)"
                                     : ""));
    }
    return format == TargetFormat::AtlasJson ? compile_atlas(g)
                                             : compile_openlineage(g);
}

std::vector<UploadBatch> partition_batches(const std::vector<CompiledDoc>& docs,
                                           int batch_size) {
    if (batch_size < 1) batch_size = 1;
    std::vector<UploadBatch> batches;
    std::size_t id = 0;
    for (const auto& doc : docs) {
        json current = json::array();
        for (const auto& item : doc.items) {
            current.push_back(item);
            if (static_cast<int>(current.size()) == batch_size) {
                batches.push_back({id++, doc.kind, std::move(current)});
                current = json::array();
            }
        }
        if (!current.empty() || doc.items.empty()) {
            batches.push_back({id++, doc.kind, std::move(current)});
        }
    }
    return batches;
}

FileSink::FileSink(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
}

bool FileSink::deliver(const UploadBatch& batch, std::string* error) {
    const auto path = dir_ / ("batch-" + std::to_string(batch.id) + ".json");
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        if (error) *error = "cannot open " + path.string();
        return false;
    }
    json doc;
    doc["batch_id"] = batch.id;
    doc["kind"] = batch.kind;
    doc["items"] = batch.items;
    out << doc.dump(2) << "\n";
    return static_cast<bool>(out);
}

struct HttpSink::Impl {
    std::string host;
    std::string path_prefix;
};

HttpSink::HttpSink(std::string endpoint) : impl_(new Impl) {
    // split http://host:port/prefix into client base and path prefix
    auto scheme_end = endpoint.find("://");
    std::size_t path_start = std::string::npos;
    if (scheme_end != std::string::npos) {
        path_start = endpoint.find('/', scheme_end + 3);
    }
    if (path_start == std::string::npos) {
        impl_->host = endpoint;
    } else {
        impl_->host = endpoint.substr(0, path_start);
        impl_->path_prefix = endpoint.substr(path_start);
        if (impl_->path_prefix == "/") impl_->path_prefix.clear();
    }
}

HttpSink::~HttpSink() = default;

bool HttpSink::deliver(const UploadBatch& batch, std::string* error) {
    httplib::Client client(impl_->host);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(30, 0);

    json doc;
    doc["batch_id"] = batch.id;
    doc["kind"] = batch.kind;
    doc["items"] = batch.items;

    auto res = client.Post(impl_->path_prefix + "/entities/bulk", doc.dump(),
                           "application/json");
    if (!res) {
        if (error) *error = "connection failed: " + httplib::to_string(res.error());
        return false;
    }
    if (res->status < 200 || res->status >= 300) {
        if (error) *error = "http status " + std::to_string(res->status);
        return false;
    }
    return true;
}

std::unique_ptr<Sink> open_sink(const std::string& target) {
    if (target.rfind("http://", 0) == 0 || target.rfind("https://", 0) == 0) {
        return std::make_unique<HttpSink>(target);
    }
    return std::make_unique<FileSink>(target);
}

UploadCheckpoint load_upload_checkpoint(const std::filesystem::path& path) {
    UploadCheckpoint cp;
    std::ifstream in(path);
    if (!in) return cp;
    std::stringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !j.contains("delivered")) {
        throw CorruptCheckpoint("upload checkpoint is not decodable");
    }
    cp.graph_tag = j.value("graph", "");
    for (const auto& id : j["delivered"]) {
        cp.delivered.insert(id.get<std::size_t>());
    }
    return cp;
}

void save_upload_checkpoint(const UploadCheckpoint& cp,
                            const std::filesystem::path& path) {
    json j;
    j["graph"] = cp.graph_tag;
    j["delivered"] = json::array();
    for (std::size_t id : cp.delivered) j["delivered"].push_back(id);
    const std::string tmp_name = path.string() + ".tmp";
    {
        std::ofstream out(tmp_name, std::ios::trunc);
        if (!out)
            throw SourceUnavailable("cannot write upload checkpoint: " +
                                    path.string());
        out << j.dump() << "\n";
    }
    std::filesystem::rename(tmp_name, path);
}

UploadReport upload(Sink& sink, const std::vector<UploadBatch>& batches,
                    const std::filesystem::path& checkpoint_path,
                    const UploadOptions& opts) {
    UploadCheckpoint cp = load_upload_checkpoint(checkpoint_path);
    if (!opts.graph_tag.empty() && cp.graph_tag != opts.graph_tag) {
        cp = UploadCheckpoint{}; // progress belongs to a different graph
        cp.graph_tag = opts.graph_tag;
    }
    UploadReport report;

    auto sleeper = opts.sleeper ? opts.sleeper : [](int delay_ms) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    };

    for (const auto& batch : batches) {
        if (cp.delivered.count(batch.id)) {
            report.skipped.push_back(batch.id);
            continue;
        }
        bool ok = false;
        std::string error;
        int delay_ms = opts.base_delay_ms;
        for (int attempt = 1; attempt <= opts.max_attempts; ++attempt) {
            ok = sink.deliver(batch, &error);
            report.attempt_log.push_back(
                "batch " + std::to_string(batch.id) + " attempt " +
                std::to_string(attempt) + (ok ? ": delivered" : ": " + error));
            if (ok) break;
            if (attempt < opts.max_attempts) {
                sleeper(delay_ms);
                delay_ms = static_cast<int>(delay_ms * opts.backoff_factor);
            }
        }
        if (!ok) {
            report.failed.push_back(batch.id);
            throw SinkUnavailable("batch " + std::to_string(batch.id) +
                                  " undeliverable after " +
                                  std::to_string(opts.max_attempts) +
                                  " attempts: " + error);
        }
        report.delivered.push_back(batch.id);
        cp.delivered.insert(batch.id);
        save_upload_checkpoint(cp, checkpoint_path);
    }
    return report;
}

} // namespace provtrace
