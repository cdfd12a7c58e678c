#include "provtrace/stitcher.hpp"

#include "provtrace/errors.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>
#include <vector>

namespace provtrace {

std::string relation_qualified_name(const sql::RelationRef& ref,
                                    std::string_view server,
                                    std::string_view db) {
    switch (ref.kind) {
    case sql::RelationRef::Kind::ExternalFile:
        return external_file_qualified_name(ref.key);
    case sql::RelationRef::Kind::QueryOutput: {
        std::string out = "qo://";
        out += db;
        out.push_back('/');
        out += ref.key;
        return out;
    }
    case sql::RelationRef::Kind::Relation:
    default: {
        auto dot = ref.key.find('.');
        std::string_view schema =
            dot == std::string::npos ? "dbo" : std::string_view(ref.key).substr(0, dot);
        std::string_view object = dot == std::string::npos
                                      ? std::string_view(ref.key)
                                      : std::string_view(ref.key).substr(dot + 1);
        return dataset_qualified_name(server, db, schema, object, ref.generation);
    }
    }
}

EntityType relation_entity_type(const sql::RelationRef& ref) {
    switch (ref.kind) {
    case sql::RelationRef::Kind::ExternalFile: return EntityType::ExternalFile;
    case sql::RelationRef::Kind::QueryOutput: return EntityType::QueryOutput;
    case sql::RelationRef::Kind::Relation:
    default:
        return ref.is_view ? EntityType::View : EntityType::Table;
    }
}

namespace {

struct Aggregate {
    std::set<Guid> inputs;
    std::set<Guid> outputs;
    ColumnMapping columns;
    bool suggested{false};

    void absorb(const Aggregate& other) {
        inputs.insert(other.inputs.begin(), other.inputs.end());
        outputs.insert(other.outputs.begin(), other.outputs.end());
        for (const auto& [out_col, in_cols] : other.columns) {
            auto& dst = columns[out_col];
            dst.insert(in_cols.begin(), in_cols.end());
        }
        suggested = suggested || other.suggested;
    }
};

} // namespace

ProvenanceGraph stitch(const RuntimeExtract& runtime,
                       const std::map<std::string, sql::StatementProvenance>& prov,
                       const QueryTree& tree) {
    for (const auto& [node_id, _] : prov) {
        if (!runtime.node_map.count(node_id)) {
            throw MissingNode("provenance for unknown tree node " + node_id);
        }
    }

    ProvenanceGraph g = runtime.graph;
    if (!tree.root) return g;

    const auto& root_meta = tree.started(*tree.root).metadata;
    const std::string& server = root_meta.server_name;
    const std::string& db = root_meta.database_name;
    const std::int64_t stamp = tree.activity.events.back().ts;

    // Dataset and column entities for everything the statements touch.
    // Column ids inside StatementProvenance are relative ("key#col");
    // the graph uses fully qualified names.
    auto ensure_relation = [&](const sql::RelationRef& ref) -> Guid {
        const std::string qn = relation_qualified_name(ref, server, db);
        const EntityType type = relation_entity_type(ref);
        Entity e;
        e.type = type;
        e.qualified_name = qn;
        e.guid = entity_guid(type, qn);
        e.update_ts = stamp;
        auto dot = ref.key.find('.');
        e.attributes["name"] =
            dot == std::string::npos ? ref.key : ref.key.substr(dot + 1);
        if (ref.generation > 1)
            e.attributes["generation"] = static_cast<std::int64_t>(ref.generation);
        g.upsert(e);
        return e.guid;
    };

    auto ensure_column = [&](const std::string& relation_qn, const Guid& rel_guid,
                             std::string_view column) -> std::string {
        const std::string qn = column_qualified_name(relation_qn, column);
        Entity e;
        e.type = EntityType::Column;
        e.qualified_name = qn;
        e.guid = entity_guid(EntityType::Column, qn);
        e.update_ts = stamp;
        e.attributes["name"] = std::string(column);
        g.upsert(e);
        g.link(RelationshipType::ColumnOf, e.guid, rel_guid);
        return qn;
    };

    // Per-statement aggregates in graph terms.
    std::unordered_map<std::string, Aggregate> own;
    for (const auto& [node_id, sp] : prov) {
        Aggregate agg;
        std::unordered_map<std::string, std::pair<std::string, Guid>> rel_by_identity;
        for (const auto& ref : sp.inputs) {
            Guid guid = ensure_relation(ref);
            agg.inputs.insert(guid);
            rel_by_identity[ref.identity()] = {relation_qualified_name(ref, server, db),
                                               guid};
        }
        for (const auto& ref : sp.outputs) {
            Guid guid = ensure_relation(ref);
            agg.outputs.insert(guid);
            rel_by_identity[ref.identity()] = {relation_qualified_name(ref, server, db),
                                               guid};
        }
        auto qualify_column = [&](const std::string& col_id) -> std::string {
            auto pos = col_id.rfind('#');
            if (pos == std::string::npos) return {};
            auto it = rel_by_identity.find(col_id.substr(0, pos));
            if (it == rel_by_identity.end()) return {};
            return ensure_column(it->second.first, it->second.second,
                                 col_id.substr(pos + 1));
        };
        for (const auto& [out_col, in_cols] : sp.column_map) {
            const std::string out_qn = qualify_column(out_col);
            if (out_qn.empty()) continue;
            auto& dst = agg.columns[out_qn];
            for (const auto& in_col : in_cols) {
                const std::string in_qn = qualify_column(in_col);
                if (!in_qn.empty()) dst.insert(in_qn);
            }
        }
        agg.suggested = sp.confidence == sql::Confidence::Suggested;
        own.emplace(node_id, std::move(agg));
    }

    // Bottom-up: a node's aggregate is its own statement's plus the union
    // of everything its children spawned. Edges aggregate here; column
    // mappings attach at their own statement and roll up separately.
    auto attach = [&g](const Guid& process_guid, const Aggregate& agg,
                       const ColumnMapping* own_columns) {
        Entity* process = g.find(process_guid);
        if (!process) return;
        for (const Guid& in : agg.inputs)
            g.link(RelationshipType::Input, in, process_guid);
        for (const Guid& out : agg.outputs)
            g.link(RelationshipType::Output, process_guid, out);
        if (agg.suggested) process->attributes["lineage_confidence"] = "suggested";
        if (own_columns && !own_columns->empty()) {
            if (!process->column_mapping) process->column_mapping = ColumnMapping{};
            for (const auto& [out_col, in_cols] : *own_columns) {
                auto& dst = (*process->column_mapping)[out_col];
                dst.insert(in_cols.begin(), in_cols.end());
            }
        }
    };

    std::function<Aggregate(const QueryTreeNode&)> visit =
        [&](const QueryTreeNode& node) -> Aggregate {
        Aggregate agg;
        const ColumnMapping* own_columns = nullptr;
        auto own_it = own.find(node.node_id);
        if (own_it != own.end()) {
            agg.absorb(own_it->second);
            own_columns = &own_it->second.columns;
        }
        for (const auto& child : node.children) agg.absorb(visit(*child));

        auto map_it = runtime.node_map.find(node.node_id);
        if (map_it != runtime.node_map.end()) {
            const NodeEntities& entities = map_it->second;
            attach(entities.run_guid, agg, own_columns);
            attach(entities.static_guid, agg, own_columns);
            if (entities.proc_run_guid)
                attach(*entities.proc_run_guid, agg, nullptr);
            if (entities.proc_static_guid)
                attach(*entities.proc_static_guid, agg, nullptr);
        }
        return agg;
    };
    visit(*tree.root);

    return g;
}

ProvenanceGraph aggregate_across_runs(ProvenanceGraph g) {
    // run guid -> static guid(s)
    std::unordered_map<Guid, std::vector<Guid>> statics_of;
    for (const auto& rel : g.relationships) {
        if (rel.type == RelationshipType::RunOf) {
            statics_of[rel.from].push_back(rel.to);
        }
    }

    std::vector<Relationship> to_add;
    for (const auto& rel : g.relationships) {
        if (rel.type == RelationshipType::Input) {
            auto it = statics_of.find(rel.to);
            if (it == statics_of.end()) continue;
            for (const Guid& s : it->second)
                to_add.push_back({RelationshipType::Input, rel.from, s});
        } else if (rel.type == RelationshipType::Output) {
            auto it = statics_of.find(rel.from);
            if (it == statics_of.end()) continue;
            for (const Guid& s : it->second)
                to_add.push_back({RelationshipType::Output, s, rel.to});
        }
    }
    for (const auto& rel : to_add) g.relationships.insert(rel);
    return g;
}

ProvenanceGraph column_rollup(ProvenanceGraph g) {
    // children by SpawnedBy (child run -> parent run)
    std::unordered_map<Guid, std::vector<Guid>> children;
    std::unordered_map<Guid, bool> has_parent;
    for (const auto& rel : g.relationships) {
        if (rel.type == RelationshipType::SpawnedBy) {
            children[rel.to].push_back(rel.from);
            has_parent[rel.from] = true;
        }
    }

    std::unordered_map<Guid, ColumnMapping> rolled;
    std::function<const ColumnMapping&(const Guid&)> roll =
        [&](const Guid& run) -> const ColumnMapping& {
        auto it = rolled.find(run);
        if (it != rolled.end()) return it->second;
        ColumnMapping map;
        if (const Entity* e = g.find(run); e && e->column_mapping) {
            map = *e->column_mapping;
        }
        auto cit = children.find(run);
        if (cit != children.end()) {
            for (const Guid& child : cit->second) {
                for (const auto& [out_col, in_cols] : roll(child)) {
                    auto& dst = map[out_col];
                    dst.insert(in_cols.begin(), in_cols.end());
                }
            }
        }
        return rolled.emplace(run, std::move(map)).first->second;
    };

    std::vector<Guid> runs;
    for (const auto& [guid, entity] : g.entities) {
        if (is_run(entity.type)) runs.push_back(guid);
    }
    for (const Guid& run : runs) {
        const ColumnMapping& map = roll(run);
        if (!map.empty()) {
            Entity* e = g.find(run);
            e->column_mapping = map;
        }
    }

    // statics: union over their runs
    for (const auto& rel : g.relationships) {
        if (rel.type != RelationshipType::RunOf) continue;
        auto it = rolled.find(rel.from);
        if (it == rolled.end() || it->second.empty()) continue;
        Entity* stat = g.find(rel.to);
        if (!stat) continue;
        if (!stat->column_mapping) stat->column_mapping = ColumnMapping{};
        for (const auto& [out_col, in_cols] : it->second) {
            auto& dst = (*stat->column_mapping)[out_col];
            dst.insert(in_cols.begin(), in_cols.end());
        }
    }
    return g;
}

} // namespace provtrace
