#include "provtrace/catalog.hpp"

#include "provtrace/errors.hpp"
#include "provtrace/sql_lexer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace provtrace::sql {

using json = nlohmann::json;

std::string_view to_string(ObjectKind k) {
    switch (k) {
    case ObjectKind::Table: return "table";
    case ObjectKind::View: return "view";
    case ObjectKind::Procedure: return "procedure";
    case ObjectKind::External: return "external";
    }
    return "table";
}

std::optional<std::size_t> CatalogObject::column_index(std::string_view name) const {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].first == lower) return i;
    }
    return std::nullopt;
}

std::string object_key(const std::vector<std::string>& name_parts) {
    if (name_parts.empty()) return {};
    std::string schema = "dbo";
    std::string object = name_parts.back();
    if (name_parts.size() >= 2) schema = name_parts[name_parts.size() - 2];
    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        return s;
    };
    return lower(std::move(schema)) + "." + lower(std::move(object));
}

std::string object_key(std::string_view dotted) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : dotted) {
        if (c == '.') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return object_key(parts);
}

const CatalogObject* CatalogState::find(const std::string& key) const {
    auto it = objects_.find(key);
    return it == objects_.end() ? nullptr : &it->second;
}

CatalogObject& CatalogState::put(const std::string& key, CatalogObject obj) {
    return objects_[key] = std::move(obj);
}

void CatalogState::drop(const std::string& key) {
    auto it = objects_.find(key);
    if (it == objects_.end()) return;
    retired_generation_[key] = it->second.generation;
    objects_.erase(it);
}

int CatalogState::next_generation(const std::string& key) const {
    auto it = retired_generation_.find(key);
    return it == retired_generation_.end() ? 1 : it->second + 1;
}

std::string CatalogState::to_json() const {
    json objects = json::object();
    for (const auto& [key, obj] : objects_) {
        json cols = json::array();
        for (const auto& [name, type] : obj.columns) {
            cols.push_back(json::array({name, type}));
        }
        json entry;
        entry["kind"] = std::string(to_string(obj.kind));
        entry["generation"] = obj.generation;
        entry["columns"] = std::move(cols);
        if (obj.definition_text) entry["definition"] = *obj.definition_text;
        objects[key] = std::move(entry);
    }
    json retired = json::object();
    for (const auto& [key, gen] : retired_generation_) retired[key] = gen;
    json out;
    out["objects"] = std::move(objects);
    out["retired"] = std::move(retired);
    return out.dump();
}

CatalogState CatalogState::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
        throw provtrace::Error("catalog snapshot is not decodable");
    }
    CatalogState state;
    if (j.contains("objects")) {
        for (const auto& [key, entry] : j["objects"].items()) {
            CatalogObject obj;
            const std::string kind = entry.value("kind", "table");
            if (kind == "view") obj.kind = ObjectKind::View;
            else if (kind == "procedure") obj.kind = ObjectKind::Procedure;
            else if (kind == "external") obj.kind = ObjectKind::External;
            obj.generation = entry.value("generation", 1);
            if (entry.contains("columns")) {
                for (const auto& col : entry["columns"]) {
                    obj.columns.emplace_back(col[0].get<std::string>(),
                                             col[1].get<std::string>());
                }
            }
            if (entry.contains("definition") && entry["definition"].is_string()) {
                obj.definition_text = entry["definition"].get<std::string>();
            }
            state.objects_[key] = std::move(obj);
        }
    }
    if (j.contains("retired")) {
        for (const auto& [key, gen] : j["retired"].items()) {
            state.retired_generation_[key] = gen.get<int>();
        }
    }
    return state;
}

CatalogState CatalogState::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return CatalogState{};
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

void CatalogState::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw provtrace::SourceUnavailable("cannot write catalog snapshot: " +
                                           path.string());
    }
    out << to_json() << "\n";
}

namespace {

// Reads a dotted object name starting at tokens[i]; advances i.
std::vector<std::string> read_object_name(const std::vector<Token>& tokens,
                                          std::size_t& i) {
    std::vector<std::string> parts;
    while (i < tokens.size() && tokens[i].kind == TokenKind::Identifier) {
        parts.push_back(tokens[i].text);
        ++i;
        if (i < tokens.size() && tokens[i].is_punct('.')) {
            ++i;
        } else {
            break;
        }
    }
    return parts;
}

bool is_constraint_keyword(const Token& t) {
    return t.is("constraint") || t.is("primary") || t.is("foreign") ||
           t.is("unique") || t.is("check") || t.is("index") || t.is("key");
}

// Column list of CREATE TABLE ( ... ): names at depth 1, constraint
// entries skipped, type text preserved verbatim-ish.
std::vector<std::pair<std::string, std::string>> parse_column_defs(
    const std::vector<Token>& tokens, std::size_t& i) {
    std::vector<std::pair<std::string, std::string>> cols;
    if (!(i < tokens.size() && tokens[i].is_punct('('))) return cols;
    ++i;
    int depth = 1;
    bool at_entry_start = true;
    std::string col_name;
    std::string col_type;
    bool skipping_entry = false;

    for (; i < tokens.size() && depth > 0; ++i) {
        const Token& t = tokens[i];
        if (t.is_punct('(')) {
            ++depth;
            if (!skipping_entry && !col_name.empty()) col_type += "(";
            continue;
        }
        if (t.is_punct(')')) {
            --depth;
            if (depth == 0) break;
            if (!skipping_entry && !col_name.empty()) col_type += ")";
            continue;
        }
        if (t.is_punct(',') && depth == 1) {
            if (!skipping_entry && !col_name.empty()) {
                cols.emplace_back(col_name, col_type);
            }
            col_name.clear();
            col_type.clear();
            skipping_entry = false;
            at_entry_start = true;
            continue;
        }
        if (at_entry_start) {
            at_entry_start = false;
            if (is_constraint_keyword(t) || t.kind != TokenKind::Identifier) {
                skipping_entry = true;
            } else {
                std::string lower = t.lower;
                col_name = lower;
            }
            continue;
        }
        if (!skipping_entry) {
            if (!col_type.empty()) col_type += " ";
            col_type += t.lower;
        }
    }
    if (!skipping_entry && !col_name.empty()) cols.emplace_back(col_name, col_type);
    if (i < tokens.size()) ++i; // past the closing paren
    return cols;
}

} // namespace

DdlResult apply_ddl(CatalogState& state, std::string_view stmt) {
    std::vector<Token> tokens = lex(stmt);
    std::size_t i = statement_start_index(tokens);
    if (i >= tokens.size() || tokens[i].kind != TokenKind::Identifier) {
        return {DdlOutcome::NotDdl, {}};
    }

    const Token& head = tokens[i];

    if (head.is("create")) {
        ++i;
        if (i < tokens.size() && tokens[i].is("or")) i += 2; // CREATE OR ALTER
        if (i >= tokens.size()) return {DdlOutcome::Unsupported, "truncated CREATE"};

        if (tokens[i].is("table")) {
            ++i;
            auto name = read_object_name(tokens, i);
            if (name.empty()) return {DdlOutcome::Unsupported, "CREATE TABLE without name"};
            const std::string key = object_key(name);
            auto cols = parse_column_defs(tokens, i);
            if (cols.empty()) {
                return {DdlOutcome::Unsupported,
                        "CREATE TABLE " + key + " without a column list"};
            }
            CatalogObject obj;
            obj.kind = ObjectKind::Table;
            obj.generation = state.next_generation(key);
            obj.columns = std::move(cols);
            state.put(key, std::move(obj));
            return {DdlOutcome::Applied, {}};
        }
        if (tokens[i].is("view")) {
            ++i;
            auto name = read_object_name(tokens, i);
            if (name.empty()) return {DdlOutcome::Unsupported, "CREATE VIEW without name"};
            const std::string key = object_key(name);
            // definition = text after AS
            while (i < tokens.size() && !tokens[i].is("as")) ++i;
            if (i >= tokens.size() || tokens[i].kind == TokenKind::End) {
                return {DdlOutcome::Unsupported, "CREATE VIEW " + key + " without AS"};
            }
            const std::size_t def_pos = tokens[i + 1].pos;
            CatalogObject obj;
            obj.kind = ObjectKind::View;
            obj.generation = state.next_generation(key);
            obj.definition_text = std::string(stmt.substr(def_pos));
            state.put(key, std::move(obj));
            return {DdlOutcome::Applied, {}};
        }
        if (tokens[i].is("procedure") || tokens[i].is("proc")) {
            ++i;
            auto name = read_object_name(tokens, i);
            if (name.empty())
                return {DdlOutcome::Unsupported, "CREATE PROCEDURE without name"};
            const std::string key = object_key(name);
            CatalogObject obj;
            obj.kind = ObjectKind::Procedure;
            obj.generation = state.next_generation(key);
            obj.definition_text = std::string(stmt);
            state.put(key, std::move(obj));
            return {DdlOutcome::Applied, {}};
        }
        if (tokens[i].is("index") || tokens[i].is("clustered") ||
            tokens[i].is("nonclustered")) {
            return {DdlOutcome::NotDdl, {}}; // no catalog objects of concern
        }
        return {DdlOutcome::Unsupported,
                "unsupported CREATE " + tokens[i].lower};
    }

    if (head.is("drop")) {
        ++i;
        if (i >= tokens.size()) return {DdlOutcome::Unsupported, "truncated DROP"};
        if (tokens[i].is("table") || tokens[i].is("view") ||
            tokens[i].is("procedure") || tokens[i].is("proc")) {
            ++i;
            if (i < tokens.size() && tokens[i].is("if")) i += 2; // IF EXISTS
            auto name = read_object_name(tokens, i);
            if (name.empty()) return {DdlOutcome::Unsupported, "DROP without name"};
            state.drop(object_key(name));
            return {DdlOutcome::Applied, {}};
        }
        return {DdlOutcome::Unsupported, "unsupported DROP " + tokens[i].lower};
    }

    if (head.is("alter")) {
        // Recorded but not replayed; the mirrored schema may go stale and
        // later statements degrade to suggestions.
        return {DdlOutcome::Unsupported, "ALTER statements are not replayed"};
    }

    return {DdlOutcome::NotDdl, {}};
}

} // namespace provtrace::sql
