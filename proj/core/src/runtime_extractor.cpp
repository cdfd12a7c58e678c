#include "provtrace/runtime_extractor.hpp"

#include "provtrace/errors.hpp"
#include "provtrace/sql_analyzer.hpp"

#include <algorithm>

namespace provtrace {

namespace {

struct TypePair {
    EntityType static_type;
    EntityType run_type;
};

TypePair types_for_class(EventClass klass) {
    switch (klass) {
    case EventClass::SqlBatch:
        return {EntityType::Batch, EntityType::BatchRun};
    case EventClass::SqlStatement:
        return {EntityType::AdhocStatement, EntityType::AdhocStatementRun};
    case EventClass::SpStatement:
        return {EntityType::SpStatement, EntityType::SpStatementRun};
    }
    return {EntityType::AdhocStatement, EntityType::AdhocStatementRun};
}

std::string proc_display(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out.push_back('.');
        out += p;
    }
    return out;
}

Entity make_run_entity(EntityType type, const std::string& qn,
                       const QueryEvent& started, const QueryEvent& completed,
                       const QueryTreeNode& node) {
    Entity run;
    run.type = type;
    run.qualified_name = qn;
    run.guid = entity_guid(type, qn);
    run.update_ts = completed.ts;

    auto& attrs = run.attributes;
    attrs["activity_id"] = started.activity_id;
    attrs["node_id"] = node.node_id;
    attrs["start_ts"] = started.ts;
    attrs["end_ts"] = completed.ts;
    if (!started.metadata.username.empty())
        attrs["username"] = started.metadata.username;
    if (!started.metadata.client_app_name.empty())
        attrs["client_app_name"] = started.metadata.client_app_name;
    const auto& m = completed.metadata;
    if (m.cpu_time_us) attrs["cpu_time_us"] = *m.cpu_time_us;
    if (m.duration_us) attrs["duration_us"] = *m.duration_us;
    if (m.rows_inserted) attrs["rows_inserted"] = *m.rows_inserted;
    if (m.rows_updated) attrs["rows_updated"] = *m.rows_updated;
    if (m.rows_deleted) attrs["rows_deleted"] = *m.rows_deleted;
    if (m.rows_returned) attrs["rows_returned"] = *m.rows_returned;
    if (node.compressed_iterations > 0) {
        attrs["compressed_iterations"] =
            static_cast<std::int64_t>(node.compressed_iterations);
    }
    return run;
}

} // namespace

std::string node_static_identity(const QueryTree& tree, const QueryTreeNode& node) {
    const QueryEvent& started = tree.started(node);
    if (auto proc = sql::executed_procedure(started.query_text)) {
        return sql::object_key(*proc);
    }
    return "h" + sql::statement_identity_hash(started.query_text);
}

RuntimeExtract extract_runtime(const QueryTree& tree) {
    RuntimeExtract out;
    if (!tree.root) return out;

    const QueryEvent& root_started = tree.started(*tree.root);
    const auto& root_meta = root_started.metadata;
    const std::string& db = root_meta.database_name;

    // All runs are associated with the client connection that initiated
    // the activity.
    Entity connection;
    connection.type = EntityType::ClientConnection;
    connection.qualified_name = connection_qualified_name(
        root_meta.server_name, root_meta.client_host, root_meta.client_app_name,
        root_meta.username);
    connection.guid = entity_guid(EntityType::ClientConnection,
                                  connection.qualified_name);
    connection.update_ts = root_started.ts;
    if (!root_meta.server_name.empty())
        connection.attributes["server_name"] = root_meta.server_name;
    if (!root_meta.client_host.empty())
        connection.attributes["client_host"] = root_meta.client_host;
    if (!root_meta.client_app_name.empty())
        connection.attributes["client_app_name"] = root_meta.client_app_name;
    if (!root_meta.username.empty())
        connection.attributes["username"] = root_meta.username;
    out.graph.upsert(connection);

    // node_id -> run entity children attach under
    std::map<std::string, Guid> attach;

    for_each_node(*tree.root, [&](const QueryTreeNode& node) {
        if (!node.completed_idx) {
            throw InvariantViolation("incomplete node " + node.node_id +
                                     " in activity " + tree.activity.activity_id);
        }
        const QueryEvent& started = tree.started(node);
        const QueryEvent& completed = tree.completed(node);

        auto proc = sql::executed_procedure(started.query_text);
        const bool is_root = node.parent == nullptr;

        NodeEntities entities;
        Guid own_run_guid;

        if (proc && is_root) {
            // A root EXECUTE collapses into the procedure run itself.
            const std::string key = sql::object_key(*proc);
            const std::string static_qn = static_query_qualified_name(db, key);
            Entity sp;
            sp.type = EntityType::StoredProcedure;
            sp.qualified_name = static_qn;
            sp.guid = entity_guid(sp.type, static_qn);
            sp.update_ts = completed.ts;
            sp.attributes["name"] = proc_display(*proc);
            out.graph.upsert(sp);

            const std::string run_qn =
                run_qualified_name(tree.activity.activity_id, node.node_id);
            Entity run = make_run_entity(EntityType::StoredProcedureRun, run_qn,
                                         started, completed, node);
            run.attributes["query_text"] = started.query_text;
            out.graph.upsert(run);

            out.graph.link(RelationshipType::RunOf, run.guid, sp.guid);
            out.graph.link(RelationshipType::ConnectionOf, run.guid,
                           connection.guid);

            entities.static_guid = sp.guid;
            entities.run_guid = run.guid;
            own_run_guid = run.guid;
            attach[node.node_id] = run.guid;
        } else {
            TypePair types = types_for_class(started.klass);
            // The node's own statement identity is always text-based; the
            // procedure identity (for EXECUTE) names the expanded entity
            // below.
            const std::string identity =
                "h" + sql::statement_identity_hash(started.query_text);
            const std::string static_qn = static_query_qualified_name(db, identity);

            Entity stat;
            stat.type = types.static_type;
            stat.qualified_name = static_qn;
            stat.guid = entity_guid(stat.type, static_qn);
            stat.update_ts = completed.ts;
            stat.attributes["query_text"] = started.query_text;
            out.graph.upsert(stat);

            const std::string run_qn =
                run_qualified_name(tree.activity.activity_id, node.node_id);
            Entity run =
                make_run_entity(types.run_type, run_qn, started, completed, node);
            out.graph.upsert(run);

            out.graph.link(RelationshipType::RunOf, run.guid, stat.guid);
            out.graph.link(RelationshipType::ConnectionOf, run.guid,
                           connection.guid);

            entities.static_guid = stat.guid;
            entities.run_guid = run.guid;
            own_run_guid = run.guid;
            attach[node.node_id] = run.guid;

            if (proc) {
                // The statement spawns the invoked procedure's run;
                // children of this node belong under that run.
                const std::string key = sql::object_key(*proc);
                const std::string proc_qn = static_query_qualified_name(db, key);
                Entity sp;
                sp.type = EntityType::StoredProcedure;
                sp.qualified_name = proc_qn;
                sp.guid = entity_guid(sp.type, proc_qn);
                sp.update_ts = completed.ts;
                sp.attributes["name"] = proc_display(*proc);
                out.graph.upsert(sp);

                const std::string proc_run_qn = run_qualified_name(
                    tree.activity.activity_id, node.node_id + ".x");
                Entity sp_run = make_run_entity(EntityType::StoredProcedureRun,
                                                proc_run_qn, started, completed,
                                                node);
                out.graph.upsert(sp_run);

                out.graph.link(RelationshipType::RunOf, sp_run.guid, sp.guid);
                out.graph.link(RelationshipType::ConnectionOf, sp_run.guid,
                               connection.guid);
                out.graph.link(RelationshipType::SpawnedBy, sp_run.guid,
                               own_run_guid);

                entities.proc_static_guid = sp.guid;
                entities.proc_run_guid = sp_run.guid;
                attach[node.node_id] = sp_run.guid;
            }
        }

        if (node.parent) {
            auto it = attach.find(node.parent->node_id);
            if (it != attach.end()) {
                out.graph.link(RelationshipType::SpawnedBy, own_run_guid,
                               it->second);
            }
        }

        out.node_map.emplace(node.node_id, entities);
    });

    return out;
}

} // namespace provtrace
