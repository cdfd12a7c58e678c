#include "provtrace/sql_script.hpp"

#include "provtrace/sql_lexer.hpp"

namespace provtrace::sql {

SqlScript generate_script(const QueryTree& tree) {
    SqlScript script;
    if (!tree.root) return script;

    for_each_node(*tree.root, [&script, &tree](const QueryTreeNode& node) {
        if (node.route != NodeRoute::Full) return;
        const QueryEvent& started = tree.started(node);
        if (started.query_text.empty()) return;

        ScriptStatement stmt;
        stmt.node_id = node.node_id;
        stmt.text = started.query_text;
        stmt.offset = script.text.size();
        stmt.length = stmt.text.size();
        auto extras_it = started.extras.find("bindings");
        if (extras_it != started.extras.end()) {
            stmt.bindings_json = extras_it->second;
        }
        script.text += stmt.text;
        script.text.push_back('\n');
        script.statements.push_back(std::move(stmt));
    });
    return script;
}

ExtractOutput extract_provenance(const SqlScript& script, CatalogState& catalog,
                                 BindingMode mode, const AnalyzerOptions& opts) {
    ExtractOutput out;

    for (const auto& stmt : script.statements) {
        BindingOverlay overlay;
        const BindingOverlay* overlay_ptr = nullptr;
        if (mode == BindingMode::PreBound && !stmt.bindings_json.empty()) {
            overlay = BindingOverlay::from_json(stmt.bindings_json);
            if (!overlay.objects.empty()) overlay_ptr = &overlay;
        }

        StatementProvenance prov =
            analyze_statement(stmt.text, catalog, mode, opts, overlay_ptr);
        prov.node_id = stmt.node_id;

        // Catalog replay; strictly in script order.
        DdlResult ddl = apply_ddl(catalog, stmt.text);
        if (ddl.outcome == DdlOutcome::Unsupported && !ddl.message.empty()) {
            out.diagnostics.push_back(stmt.node_id + ": " + ddl.message);
        }

        // SELECT ... INTO creates a table the mirrored catalog must know.
        if (ddl.outcome == DdlOutcome::NotDdl) {
            std::vector<Token> tokens = lex(stmt.text);
            std::size_t start = statement_start_index(tokens);
            if (start < tokens.size() && tokens[start].is("select")) {
                for (const auto& rel : prov.outputs) {
                    if (rel.kind != RelationRef::Kind::Relation) continue;
                    if (catalog.find(rel.key)) continue;
                    std::vector<std::pair<std::string, std::string>> cols;
                    const std::string prefix = rel.identity() + "#";
                    for (const auto& [out_col, _] : prov.column_map) {
                        if (out_col.rfind(prefix, 0) == 0) {
                            cols.emplace_back(out_col.substr(prefix.size()), "");
                        }
                    }
                    if (!cols.empty()) {
                        CatalogObject obj;
                        obj.kind = ObjectKind::Table;
                        obj.generation = rel.generation;
                        obj.columns = std::move(cols);
                        catalog.put(rel.key, std::move(obj));
                    }
                }
            }
        }

        for (const auto& diag : prov.diagnostics) {
            out.diagnostics.push_back(stmt.node_id + ": " + diag);
        }
        out.by_node.emplace(stmt.node_id, std::move(prov));
    }
    return out;
}

} // namespace provtrace::sql
