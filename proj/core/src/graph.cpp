#include "provtrace/graph.hpp"

#include "provtrace/errors.hpp"

#include <algorithm>

namespace provtrace {

std::string_view type_name(EntityType t) {
    switch (t) {
    case EntityType::Table: return "table";
    case EntityType::View: return "view";
    case EntityType::ExternalFile: return "external_file";
    case EntityType::Column: return "column";
    case EntityType::QueryOutput: return "query_output";
    case EntityType::StoredProcedure: return "stored_procedure";
    case EntityType::StoredProcedureRun: return "stored_procedure_run";
    case EntityType::Batch: return "batch";
    case EntityType::BatchRun: return "batch_run";
    case EntityType::AdhocStatement: return "adhoc_statement";
    case EntityType::AdhocStatementRun: return "adhoc_statement_run";
    case EntityType::SpStatement: return "sp_statement";
    case EntityType::SpStatementRun: return "sp_statement_run";
    case EntityType::ClientConnection: return "client_connection";
    }
    return "unknown";
}

bool is_run(EntityType t) {
    switch (t) {
    case EntityType::StoredProcedureRun:
    case EntityType::BatchRun:
    case EntityType::AdhocStatementRun:
    case EntityType::SpStatementRun:
        return true;
    default:
        return false;
    }
}

bool is_process(EntityType t) {
    switch (t) {
    case EntityType::StoredProcedure:
    case EntityType::Batch:
    case EntityType::AdhocStatement:
    case EntityType::SpStatement:
        return true;
    default:
        return is_run(t);
    }
}

bool is_dataset(EntityType t) {
    switch (t) {
    case EntityType::Table:
    case EntityType::View:
    case EntityType::ExternalFile:
    case EntityType::QueryOutput:
    case EntityType::Column:
        return true;
    default:
        return false;
    }
}

std::string_view relationship_name(RelationshipType t) {
    switch (t) {
    case RelationshipType::Input: return "input";
    case RelationshipType::Output: return "output";
    case RelationshipType::RunOf: return "run_of";
    case RelationshipType::SpawnedBy: return "spawned_by";
    case RelationshipType::ConnectionOf: return "connection_of";
    case RelationshipType::ColumnOf: return "column_of";
    }
    return "unknown";
}

Entity& ProvenanceGraph::upsert(Entity e) {
    auto it = entities.find(e.guid);
    if (it == entities.end()) {
        auto [pos, _] = entities.emplace(e.guid, std::move(e));
        return pos->second;
    }

    Entity& existing = it->second;
    if (existing.type != e.type || existing.qualified_name != e.qualified_name) {
        throw TypeConflict("qualified name registered twice with different type: " +
                           existing.qualified_name);
    }
    if (e.update_ts >= existing.update_ts) {
        for (auto& [k, v] : e.attributes) existing.attributes[k] = std::move(v);
        existing.update_ts = e.update_ts;
    } else {
        for (auto& [k, v] : e.attributes) existing.attributes.emplace(k, std::move(v));
    }
    if (e.column_mapping) {
        if (!existing.column_mapping) {
            existing.column_mapping = std::move(e.column_mapping);
        } else {
            for (auto& [out, ins] : *e.column_mapping) {
                auto& dst = (*existing.column_mapping)[out];
                dst.insert(ins.begin(), ins.end());
            }
        }
    }
    return existing;
}

namespace {

std::string join(const std::vector<std::string>& parts, std::size_t from,
                 char sep = '/') {
    std::string out;
    for (std::size_t i = from; i < parts.size(); ++i) {
        if (i > from) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

} // namespace

std::string qualified_name(EntityType kind, const std::vector<std::string>& parts) {
    switch (kind) {
    case EntityType::Table:
    case EntityType::View:
    case EntityType::QueryOutput:
        return "ds://" + join(parts, 0);
    case EntityType::Column:
        // parts = relation parts + column name last
        return "ds://" + join(parts, 0, '/');
    case EntityType::ExternalFile:
        return "file://" + join(parts, 0);
    case EntityType::StoredProcedure:
    case EntityType::Batch:
    case EntityType::AdhocStatement:
    case EntityType::SpStatement:
        return "q://" + join(parts, 0);
    case EntityType::StoredProcedureRun:
    case EntityType::BatchRun:
    case EntityType::AdhocStatementRun:
    case EntityType::SpStatementRun:
        return "run://" + join(parts, 0);
    case EntityType::ClientConnection:
        return "conn://" + join(parts, 0);
    }
    return join(parts, 0);
}

std::string dataset_qualified_name(std::string_view server, std::string_view db,
                                   std::string_view schema,
                                   std::string_view object, int generation) {
    std::string out = "ds://";
    out += server;
    out.push_back('/');
    out += db;
    out.push_back('/');
    out += schema;
    out.push_back('/');
    out += object;
    if (generation > 1) {
        out.push_back('@');
        out += std::to_string(generation);
    }
    return out;
}

std::string column_qualified_name(std::string_view relation_qn,
                                  std::string_view column) {
    std::string out(relation_qn);
    out.push_back('#');
    out += column;
    return out;
}

std::string relation_of_column(std::string_view column_qn) {
    auto pos = column_qn.rfind('#');
    if (pos == std::string_view::npos) return std::string(column_qn);
    return std::string(column_qn.substr(0, pos));
}

std::string external_file_qualified_name(std::string_view path) {
    return "file://" + std::string(path);
}

std::string static_query_qualified_name(std::string_view db,
                                        std::string_view identity) {
    std::string out = "q://";
    out += db;
    out.push_back('/');
    out += identity;
    return out;
}

std::string run_qualified_name(std::string_view activity_id,
                               std::string_view node_id) {
    std::string out = "run://";
    out += activity_id;
    out.push_back('/');
    out += node_id;
    return out;
}

std::string connection_qualified_name(std::string_view server,
                                      std::string_view client_host,
                                      std::string_view client_app,
                                      std::string_view username) {
    std::string out = "conn://";
    out += server;
    out.push_back('/');
    out += client_host;
    out.push_back('/');
    out += client_app;
    out.push_back('/');
    out += username;
    return out;
}

ProvenanceGraph merge(const ProvenanceGraph& g1, const ProvenanceGraph& g2) {
    ProvenanceGraph out;

    // Detect name/type conflicts across both inputs.
    std::unordered_map<std::string, EntityType> names;
    auto absorb = [&out, &names](const ProvenanceGraph& g) {
        for (const auto& [guid, entity] : g.entities) {
            auto it = names.find(entity.qualified_name);
            if (it != names.end() && it->second != entity.type) {
                throw TypeConflict(
                    "qualified name appears with two entity types: " +
                    entity.qualified_name);
            }
            names.emplace(entity.qualified_name, entity.type);
            out.upsert(entity);
        }
        for (const auto& rel : g.relationships) out.relationships.insert(rel);
    };
    absorb(g1);
    absorb(g2);
    return out;
}

std::vector<std::string> validate(const ProvenanceGraph& g) {
    std::vector<std::string> issues;

    std::unordered_map<std::string, EntityType> names;
    for (const auto& [guid, entity] : g.entities) {
        auto [it, inserted] = names.emplace(entity.qualified_name, entity.type);
        if (!inserted) {
            issues.push_back("duplicate qualified name: " + entity.qualified_name);
        }
        if (entity.column_mapping && !is_process(entity.type)) {
            issues.push_back("column mapping on non-process entity: " +
                             entity.qualified_name);
        }
    }

    for (const auto& rel : g.relationships) {
        if (!g.find(rel.from) || !g.find(rel.to)) {
            issues.push_back(std::string("dangling ") +
                             std::string(relationship_name(rel.type)) +
                             " relationship");
        }
    }

    // Every (input column, process, output column) triple must be backed
    // by Input/Output edges on the owning process.
    for (const auto& [guid, entity] : g.entities) {
        if (!entity.column_mapping) continue;
        for (const auto& [out_col, in_cols] : *entity.column_mapping) {
            const std::string out_rel = relation_of_column(out_col);
            const Entity* out_entity = nullptr;
            for (EntityType t : {EntityType::Table, EntityType::View,
                                 EntityType::QueryOutput, EntityType::ExternalFile}) {
                if (auto* e = g.find(entity_guid(t, out_rel))) {
                    out_entity = e;
                    break;
                }
            }
            if (!out_entity ||
                !g.relationships.count({RelationshipType::Output, guid,
                                        out_entity->guid})) {
                issues.push_back("column mapping without Output edge: " +
                                 entity.qualified_name + " -> " + out_rel);
            }
            for (const auto& in_col : in_cols) {
                const std::string in_rel = relation_of_column(in_col);
                const Entity* in_entity = nullptr;
                for (EntityType t :
                     {EntityType::Table, EntityType::View, EntityType::QueryOutput,
                      EntityType::ExternalFile}) {
                    if (auto* e = g.find(entity_guid(t, in_rel))) {
                        in_entity = e;
                        break;
                    }
                }
                if (!in_entity ||
                    !g.relationships.count({RelationshipType::Input,
                                            in_entity->guid, guid})) {
                    issues.push_back("column mapping without Input edge: " + in_rel +
                                     " -> " + entity.qualified_name);
                }
            }
        }
    }
    return issues;
}

} // namespace provtrace
