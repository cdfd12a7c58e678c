#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace provtrace::sql {

enum class ObjectKind { Table, View, Procedure, External };

std::string_view to_string(ObjectKind k);

struct CatalogObject {
    ObjectKind kind{ObjectKind::Table};
    int generation{1};
    // Ordered (name, type) pairs; names lowercased.
    std::vector<std::pair<std::string, std::string>> columns;
    std::optional<std::string> definition_text; // views and procedures

    std::optional<std::size_t> column_index(std::string_view name) const;
};

// Normalizes an object reference to its catalog key: lowercase
// "schema.object" with schema defaulting to dbo; server/database parts of
// longer names are dropped.
std::string object_key(const std::vector<std::string>& name_parts);
std::string object_key(std::string_view dotted);

// Mirror of the source database catalog, replayed from the DDL observed
// in the logs. Replay must be strictly sequential in activity trigger
// order (the binding of later statements depends on earlier DDL).
class CatalogState {
public:
    const CatalogObject* find(const std::string& key) const;
    CatalogObject& put(const std::string& key, CatalogObject obj);

    // Removes the object; a later create of the same key gets a bumped
    // generation (the old name may still be referenced by older lineage).
    void drop(const std::string& key);

    // Generation a create of `key` would receive right now.
    int next_generation(const std::string& key) const;

    bool empty() const { return objects_.empty(); }
    std::size_t size() const { return objects_.size(); }
    const std::map<std::string, CatalogObject>& objects() const { return objects_; }

    std::string to_json() const;
    static CatalogState from_json(const std::string& text);

    // Snapshot persistence alongside the run checkpoint. Missing file
    // loads as an empty state.
    static CatalogState load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::map<std::string, CatalogObject> objects_;
    std::map<std::string, int> retired_generation_;
};

enum class DdlOutcome {
    Applied,     // catalog changed
    NotDdl,      // statement does not touch the catalog; state unchanged
    Unsupported, // looked like DDL but the subset cannot replay it
};

struct DdlResult {
    DdlOutcome outcome{DdlOutcome::NotDdl};
    std::string message;
};

// Replays one statement into the mirrored catalog: CREATE TABLE adds an
// object with its columns, DROP removes (bumping the generation on
// recreate), CREATE VIEW / CREATE PROCEDURE store the definition text.
// Anything else leaves the state unchanged.
DdlResult apply_ddl(CatalogState& state, std::string_view stmt);

} // namespace provtrace::sql
