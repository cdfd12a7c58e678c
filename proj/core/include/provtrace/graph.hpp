#pragma once

#include "provtrace/hash.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace provtrace {

// Catalog-compatible entity types. *Run types are processes of dynamic
// kind; their non-Run counterparts are static queries.
enum class EntityType {
    Table,
    View,
    ExternalFile,
    Column,
    QueryOutput,
    StoredProcedure,
    StoredProcedureRun,
    Batch,
    BatchRun,
    AdhocStatement,
    AdhocStatementRun,
    SpStatement,
    SpStatementRun,
    ClientConnection,
};

std::string_view type_name(EntityType t);
bool is_process(EntityType t);
bool is_run(EntityType t);
bool is_dataset(EntityType t);

enum class RelationshipType {
    Input,        // dataset -> process
    Output,       // process -> dataset
    RunOf,        // run -> static query
    SpawnedBy,    // child run -> parent run
    ConnectionOf, // run -> client connection
    ColumnOf,     // column -> relation
};

std::string_view relationship_name(RelationshipType t);

using AttrValue = std::variant<std::string, std::int64_t, double, bool>;

// Output column qualified name -> set of input column qualified names.
// The ternary (input, process, output) relation, kept as a process
// attribute because the target type system only supports binary
// relationships.
using ColumnMapping = std::map<std::string, std::set<std::string>>;

struct Entity {
    Guid guid;
    EntityType type{EntityType::Table};
    std::string qualified_name;
    std::map<std::string, AttrValue> attributes;
    std::optional<ColumnMapping> column_mapping; // process entities only
    // Stamp of the run that last wrote the attributes; merge resolves
    // attribute conflicts last-writer-wins on it.
    std::int64_t update_ts{0};
};

struct Relationship {
    RelationshipType type{RelationshipType::Input};
    Guid from;
    Guid to;

    auto operator<=>(const Relationship&) const = default;
};

// Typed entities plus relationships; the artifact's output. Values are
// cheap to construct per activity and merged by a single reducer.
struct ProvenanceGraph {
    std::unordered_map<Guid, Entity> entities;
    std::set<Relationship> relationships;

    // Inserts or merges (attribute LWW by update_ts, column mappings
    // union key-wise). Throws TypeConflict when the qualified name is
    // already taken by a different entity type.
    Entity& upsert(Entity e);

    void link(RelationshipType type, const Guid& from, const Guid& to) {
        relationships.insert({type, from, to});
    }

    const Entity* find(const Guid& g) const {
        auto it = entities.find(g);
        return it == entities.end() ? nullptr : &it->second;
    }
    Entity* find(const Guid& g) {
        auto it = entities.find(g);
        return it == entities.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return entities.size() + relationships.size(); }
};

// Deterministic qualified-name scheme:
//   datasets      ds://<server>/<db>/<schema>/<object>[@<gen>][#<column>]
//   external file file://<path>
//   static query  q://<db>/<identity>
//   runs          run://<activity_id>/<node_id>
//   connections   conn://<server>/<client_host>/<client_app>/<username>
std::string qualified_name(EntityType kind, const std::vector<std::string>& parts);

std::string dataset_qualified_name(std::string_view server, std::string_view db,
                                   std::string_view schema, std::string_view object,
                                   int generation = 1);
std::string column_qualified_name(std::string_view relation_qn,
                                  std::string_view column);
// Inverse of column_qualified_name.
std::string relation_of_column(std::string_view column_qn);
std::string external_file_qualified_name(std::string_view path);
std::string static_query_qualified_name(std::string_view db,
                                        std::string_view identity);
std::string run_qualified_name(std::string_view activity_id,
                               std::string_view node_id);
std::string connection_qualified_name(std::string_view server,
                                      std::string_view client_host,
                                      std::string_view client_app,
                                      std::string_view username);

inline Guid entity_guid(EntityType type, std::string_view qualified_name) {
    return make_guid(type_name(type), qualified_name);
}

// Set union by guid and relationship triple. Idempotent and commutative
// up to attribute conflicts (resolved last-writer-wins by update stamp).
ProvenanceGraph merge(const ProvenanceGraph& g1, const ProvenanceGraph& g2);

// Referential integrity and column-mapping closure. Returns one message
// per violation; empty means the graph is sound.
std::vector<std::string> validate(const ProvenanceGraph& g);

} // namespace provtrace
