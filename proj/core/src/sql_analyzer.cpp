#include "provtrace/sql_analyzer.hpp"

#include "provtrace/hash.hpp"
#include "provtrace/sql_lexer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <memory>
#include <unordered_set>

namespace provtrace::sql {

using json = nlohmann::json;

std::string RelationRef::identity() const {
    if (generation <= 1) return key;
    return key + "@" + std::to_string(generation);
}

std::string column_id(const RelationRef& rel, std::string_view column) {
    std::string out = rel.identity();
    out.push_back('#');
    for (char c : column)
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

BindingOverlay BindingOverlay::from_json(const std::string& text) {
    BindingOverlay overlay;
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) return overlay;
    for (const auto& [name, entry] : j.items()) {
        if (!entry.is_object()) continue;
        CatalogObject obj;
        obj.kind = ObjectKind::Table;
        obj.generation = entry.value("generation", 1);
        if (entry.contains("columns") && entry["columns"].is_array()) {
            for (const auto& col : entry["columns"]) {
                if (col.is_string()) {
                    std::string lower = col.get<std::string>();
                    std::transform(lower.begin(), lower.end(), lower.begin(),
                                   [](unsigned char c) { return std::tolower(c); });
                    obj.columns.emplace_back(lower, "");
                }
            }
        }
        overlay.objects[object_key(name)] = std::move(obj);
    }
    return overlay;
}

namespace {

// ---------------------------------------------------------------------
// Token helpers
// ---------------------------------------------------------------------

const std::unordered_set<std::string_view> kStatementStart = {
    "select", "insert",   "update", "delete", "merge",  "bulk",
    "exec",   "execute",  "create", "drop",   "alter",  "truncate",
    "begin",  "set",      "print",  "declare", "return", "break",
    "continue", "waitfor", "if",    "while",  "else",   "end",
    "commit", "rollback", "use",    "grant",  "revoke", "deny",
    "backup", "restore",  "dbcc",   "kill",   "checkpoint", "goto",
    "open",   "close",    "fetch",  "deallocate",
};

// Identifiers that never denote columns inside expressions.
const std::unordered_set<std::string_view> kExprKeywords = {
    "and",   "or",    "not",   "in",     "is",    "null",    "like",
    "between", "exists", "case", "when",  "then",  "else",    "end",
    "as",    "cast",  "convert", "over", "partition", "by",   "distinct",
    "top",   "asc",   "desc",  "collate", "escape", "all",    "any",
    "some",  "values", "default", "output", "percent", "with",
};

const std::unordered_set<std::string_view> kTypeNames = {
    "int",    "bigint",   "smallint", "tinyint", "bit",     "decimal",
    "numeric", "money",   "smallmoney", "float", "real",    "date",
    "datetime", "datetime2", "smalldatetime", "time", "datetimeoffset",
    "char",   "varchar",  "nchar",    "nvarchar", "text",   "ntext",
    "binary", "varbinary", "image",   "uniqueidentifier", "xml", "sysname",
};

const std::unordered_set<std::string_view> kClauseKeywords = {
    "where", "group",  "having", "order", "union", "except", "intersect",
    "on",    "inner",  "outer",  "left",  "right", "full",   "cross",
    "join",  "option", "for",    "into",  "when",  "using",  "set",
    "output", "apply", "pivot",  "unpivot",
};

bool is_statement_start(const Token& t) {
    return t.kind == TokenKind::Identifier && kStatementStart.count(t.lower) > 0;
}

struct QualifiedRef {
    std::string qualifier; // lower, may be empty
    std::string name;      // lower
};

struct ColumnBinding {
    RelationRef rel;
    std::string column; // lower

    auto operator<=>(const ColumnBinding&) const = default;
};

struct ParsedSelect;
using ParsedSelectPtr = std::shared_ptr<ParsedSelect>;

struct ExprRefs {
    std::vector<QualifiedRef> refs;
    std::vector<ParsedSelectPtr> subqueries; // scalar subqueries: data flows
};

struct SelectItem {
    bool star{false};
    std::string star_qualifier; // lower; empty for bare *
    std::string alias;          // lower; empty when unnamed
    ExprRefs expr;
};

struct ParsedSource {
    std::vector<std::string> name; // object reference (original case)
    std::string alias;             // lower
    ParsedSelectPtr subquery;
};

struct ParsedSelect {
    std::vector<SelectItem> items;
    std::vector<ParsedSource> sources;
    std::vector<QualifiedRef> control_refs;     // ON/WHERE/GROUP/... columns
    std::vector<ParsedSelectPtr> control_subqueries;
    std::optional<std::vector<std::string>> into;
};

struct Cursor {
    const std::vector<Token>& t;
    std::size_t i{0};

    const Token& cur() const { return t[std::min(i, t.size() - 1)]; }
    const Token& peek(std::size_t n = 1) const {
        return t[std::min(i + n, t.size() - 1)];
    }
    bool done() const {
        return cur().kind == TokenKind::End || cur().is_punct(';');
    }
    void next() {
        if (i + 1 < t.size()) ++i;
        else i = t.size() - 1;
    }
};

std::vector<std::string> read_name(Cursor& c) {
    std::vector<std::string> parts;
    while (c.cur().kind == TokenKind::Identifier) {
        parts.push_back(c.cur().text);
        c.next();
        if (c.cur().is_punct('.')) c.next();
        else break;
    }
    return parts;
}

ParsedSelect parse_select(Cursor& c, int depth);

// Scans one expression (select item, SET rhs, VALUES entry) collecting
// column references and scalar subqueries. Stops at a top-level comma,
// closing paren, clause keyword, or end. `stop_extra` adds statement
// specific stop words.
ExprRefs scan_expression(Cursor& c, int depth,
                         const std::unordered_set<std::string_view>& stop_words,
                         std::string* trailing_alias = nullptr) {
    ExprRefs out;
    int paren = 0;
    int case_depth = 0;
    bool after_as = false;
    std::string last_ident_alias;

    while (!c.done()) {
        const Token& t = c.cur();
        if (t.is_punct('(')) {
            if (c.peek().is("select") && depth < 24) {
                c.next(); // (
                out.subqueries.push_back(
                    std::make_shared<ParsedSelect>(parse_select(c, depth + 1)));
                if (c.cur().is_punct(')')) c.next();
                last_ident_alias.clear();
                continue;
            }
            ++paren;
            c.next();
            continue;
        }
        if (t.is_punct(')')) {
            if (paren == 0) break;
            --paren;
            c.next();
            last_ident_alias.clear();
            continue;
        }
        if (paren == 0 && t.is_punct(',')) break;

        if (t.kind == TokenKind::Identifier) {
            if (t.lower == "case") {
                ++case_depth;
                c.next();
                continue;
            }
            if (t.lower == "end" && case_depth > 0) {
                --case_depth;
                c.next();
                continue;
            }
            if (paren == 0 && case_depth == 0 && stop_words.count(t.lower)) break;
            if (t.lower == "as") {
                after_as = true;
                c.next();
                continue;
            }
            if (kExprKeywords.count(t.lower) || kTypeNames.count(t.lower)) {
                after_as = false;
                c.next();
                last_ident_alias.clear();
                continue;
            }
            if (after_as) {
                // CAST(x AS type) handled by type names; a residual AS
                // identifier at paren depth 0 is an alias.
                if (paren == 0) last_ident_alias = t.lower;
                after_as = false;
                c.next();
                continue;
            }
            // identifier chain
            std::vector<std::string> chain;
            chain.push_back(t.lower);
            c.next();
            while (c.cur().is_punct('.') &&
                   c.peek().kind == TokenKind::Identifier) {
                c.next();
                chain.push_back(c.cur().lower);
                c.next();
            }
            if (c.cur().is_punct('.') && c.peek().is_punct('*')) {
                // alias.* inside an expression list; callers handle star
                // items, ignore here
                c.next();
                c.next();
                last_ident_alias.clear();
                continue;
            }
            if (c.cur().is_punct('(')) {
                // function call; the name is not a column, arguments are
                // scanned on the following iterations
                last_ident_alias.clear();
                continue;
            }
            QualifiedRef ref;
            ref.name = chain.back();
            if (chain.size() >= 2) ref.qualifier = chain[chain.size() - 2];
            out.refs.push_back(std::move(ref));
            last_ident_alias = paren == 0 ? chain.back() : std::string{};
            continue;
        }

        last_ident_alias.clear();
        after_as = false;
        c.next();
    }

    if (trailing_alias) {
        // `expr alias` without AS: a trailing identifier that directly
        // follows a non-identifier token was consumed as a ref above;
        // detecting it precisely needs lookbehind, so only explicit AS
        // and single-ref items name outputs. Callers fall back to the
        // last ref name.
        *trailing_alias = last_ident_alias;
    }
    return out;
}

const std::unordered_set<std::string_view> kSelectItemStops = {
    "from", "into", "where", "group", "order", "having", "union", "except",
    "intersect", "option", "for",
};
const std::unordered_set<std::string_view> kFromClauseStops = {
    "where", "group", "order", "having", "union", "except", "intersect",
    "option", "for", "when",
};
const std::unordered_set<std::string_view> kConditionStops = {
    "group", "order", "having", "union", "except", "intersect", "option",
    "for",   "when",  "inner",  "left",  "right",  "full",      "cross",
    "join",
};

bool is_join_intro(const Token& t) {
    return t.is("join") || t.is("inner") || t.is("left") || t.is("right") ||
           t.is("full") || t.is("cross") || t.is("outer");
}

void parse_source_list(Cursor& c, int depth, ParsedSelect& out);

// WHERE / ON / HAVING conditions: columns are control flow, subqueries
// contribute their relations as inputs.
void scan_condition(Cursor& c, int depth, ParsedSelect& out,
                    const std::unordered_set<std::string_view>& stops) {
    while (!c.done()) {
        const Token& t = c.cur();
        if (t.is_punct(')')) break;
        if (t.kind == TokenKind::Identifier && stops.count(t.lower)) break;
        ExprRefs refs = scan_expression(c, depth, stops);
        for (auto& r : refs.refs) out.control_refs.push_back(std::move(r));
        for (auto& s : refs.subqueries) out.control_subqueries.push_back(std::move(s));
        if (c.cur().is_punct(',')) {
            c.next();
            continue;
        }
        if (c.cur().is_punct(')') ||
            (c.cur().kind == TokenKind::Identifier && stops.count(c.cur().lower)))
            break;
        if (refs.refs.empty() && refs.subqueries.empty()) c.next(); // no progress
    }
}

void parse_one_source(Cursor& c, int depth, ParsedSelect& out) {
    ParsedSource src;
    if (c.cur().is_punct('(')) {
        c.next();
        if (c.cur().is("select")) {
            src.subquery = std::make_shared<ParsedSelect>(parse_select(c, depth + 1));
        }
        int paren = 1;
        while (!c.done() && paren > 0) {
            if (c.cur().is_punct('(')) ++paren;
            if (c.cur().is_punct(')')) --paren;
            c.next();
        }
    } else {
        src.name = read_name(c);
        if (src.name.empty()) {
            c.next();
            return;
        }
    }
    if (c.cur().is("as")) c.next();
    if (c.cur().kind == TokenKind::Identifier &&
        !kClauseKeywords.count(c.cur().lower) && !is_statement_start(c.cur()) &&
        !c.cur().is("with")) {
        src.alias = c.cur().lower;
        c.next();
    }
    // table hints: WITH (NOLOCK, ...)
    if (c.cur().is("with") && c.peek().is_punct('(')) {
        c.next();
        int paren = 0;
        do {
            if (c.cur().is_punct('(')) ++paren;
            if (c.cur().is_punct(')')) --paren;
            c.next();
        } while (!c.done() && paren > 0);
    }
    out.sources.push_back(std::move(src));
}

void parse_source_list(Cursor& c, int depth, ParsedSelect& out) {
    parse_one_source(c, depth, out);
    while (!c.done()) {
        const Token& t = c.cur();
        if (t.is_punct(',')) {
            c.next();
            parse_one_source(c, depth, out);
            continue;
        }
        if (is_join_intro(t)) {
            while (is_join_intro(c.cur()) || c.cur().is("apply")) c.next();
            parse_one_source(c, depth, out);
            if (c.cur().is("on")) {
                c.next();
                scan_condition(c, depth, out, kConditionStops);
            }
            continue;
        }
        break;
    }
}

ParsedSelect parse_select(Cursor& c, int depth) {
    ParsedSelect out;
    if (c.cur().is("select")) c.next();
    if (c.cur().is("distinct") || c.cur().is("all")) c.next();
    if (c.cur().is("top")) {
        c.next();
        if (c.cur().is_punct('(')) {
            int paren = 0;
            do {
                if (c.cur().is_punct('(')) ++paren;
                if (c.cur().is_punct(')')) --paren;
                c.next();
            } while (!c.done() && paren > 0);
        } else if (c.cur().kind == TokenKind::Number) {
            c.next();
        }
        if (c.cur().is("percent")) c.next();
    }

    // select list
    while (!c.done() && !c.cur().is_punct(')')) {
        if (c.cur().kind == TokenKind::Identifier &&
            kSelectItemStops.count(c.cur().lower))
            break;

        SelectItem item;
        if (c.cur().is_punct('*')) {
            item.star = true;
            c.next();
        } else if (c.cur().kind == TokenKind::Identifier &&
                   c.peek().is_punct('.') && c.peek(2).is_punct('*')) {
            item.star = true;
            item.star_qualifier = c.cur().lower;
            c.next();
            c.next();
            c.next();
        } else {
            std::string alias;
            item.expr = scan_expression(c, depth, kSelectItemStops, &alias);
            if (c.cur().is("as")) {
                c.next();
                if (c.cur().kind == TokenKind::Identifier) {
                    item.alias = c.cur().lower;
                    c.next();
                }
            } else if (!alias.empty() && item.expr.refs.size() == 1 &&
                       alias == item.expr.refs[0].name) {
                item.alias = alias; // single bare/qualified column ref
            }
        }
        out.items.push_back(std::move(item));
        if (c.cur().is_punct(',')) {
            c.next();
            continue;
        }
        break;
    }

    if (c.cur().is("into")) {
        c.next();
        out.into = read_name(c);
    }
    if (c.cur().is("from")) {
        c.next();
        parse_source_list(c, depth, out);
    }
    if (c.cur().is("where")) {
        c.next();
        scan_condition(c, depth, out, kConditionStops);
    }
    // GROUP BY / HAVING / ORDER BY columns are control flow
    while (!c.done() && !c.cur().is_punct(')')) {
        if (c.cur().is("group") || c.cur().is("order")) {
            c.next();
            if (c.cur().is("by")) c.next();
            scan_condition(c, depth, out, kConditionStops);
            continue;
        }
        if (c.cur().is("having")) {
            c.next();
            scan_condition(c, depth, out, kConditionStops);
            continue;
        }
        if (c.cur().is("union") || c.cur().is("except") || c.cur().is("intersect")) {
            c.next();
            if (c.cur().is("all")) c.next();
            ParsedSelect rhs = parse_select(c, depth);
            // merge: positional items contribute to the same outputs
            for (std::size_t i = 0; i < rhs.items.size(); ++i) {
                if (i < out.items.size()) {
                    auto& dst = out.items[i].expr;
                    auto& srcItem = rhs.items[i];
                    if (srcItem.star) {
                        out.items[i].star = true;
                        out.items[i].star_qualifier = srcItem.star_qualifier;
                    }
                    for (auto& r : srcItem.expr.refs) dst.refs.push_back(std::move(r));
                    for (auto& s : srcItem.expr.subqueries)
                        dst.subqueries.push_back(std::move(s));
                } else {
                    out.items.push_back(std::move(rhs.items[i]));
                }
            }
            for (auto& s : rhs.sources) out.sources.push_back(std::move(s));
            for (auto& r : rhs.control_refs) out.control_refs.push_back(std::move(r));
            for (auto& s : rhs.control_subqueries)
                out.control_subqueries.push_back(std::move(s));
            continue;
        }
        break;
    }
    return out;
}

// ---------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------

struct SelectScope {
    std::vector<std::string> columns; // output names, lower, ordered
    std::map<std::string, std::set<ColumnBinding>> col_sources;
    std::vector<RelationRef> base_inputs;
    bool suggested{false};
    bool unknown_star{false}; // a * could not be expanded
};

struct ResolvedSource {
    std::string alias;     // lower, may be empty
    std::string bare_name; // last name part, lower
    bool has_ref{false};
    RelationRef ref;
    bool columns_known{false};
    std::vector<std::string> columns; // lower
    std::shared_ptr<SelectScope> scope; // views and subqueries
};

class Analyzer {
public:
    Analyzer(const CatalogState& catalog, BindingMode mode,
             const AnalyzerOptions& opts, const BindingOverlay* overlay)
        : catalog_(catalog), mode_(mode), opts_(opts), overlay_(overlay) {}

    StatementProvenance analyze(std::string_view stmt);

private:
    const CatalogState& catalog_;
    BindingMode mode_;
    const AnalyzerOptions& opts_;
    const BindingOverlay* overlay_;
    StatementProvenance out_;

    void suggest(const std::string& why) {
        out_.confidence = Confidence::Suggested;
        if (!why.empty()) out_.diagnostics.push_back(why);
    }

    const CatalogObject* lookup(const std::string& key) const {
        if (mode_ == BindingMode::PreBound && overlay_) {
            auto it = overlay_->objects.find(key);
            if (it != overlay_->objects.end()) return &it->second;
        }
        return catalog_.find(key);
    }

    ResolvedSource resolve_source(const ParsedSource& src, int view_depth);
    SelectScope resolve_select(const ParsedSelect& sel, int view_depth);
    std::set<ColumnBinding> resolve_ref(const QualifiedRef& ref,
                                        std::vector<ResolvedSource>& sources,
                                        bool* resolved);

    void add_input(const RelationRef& ref) { out_.inputs.insert(ref); }
    void add_output(const RelationRef& ref) { out_.outputs.insert(ref); }

    RelationRef make_relation_ref(const std::vector<std::string>& name_parts,
                                  const CatalogObject** obj_out = nullptr);

    void analyze_select_statement(Cursor& c, std::string_view stmt);
    void analyze_insert(Cursor& c);
    void analyze_update(Cursor& c);
    void analyze_delete(Cursor& c);
    void analyze_merge(Cursor& c);
    void analyze_bulk_insert(Cursor& c);
    void analyze_create(Cursor& c, std::string_view stmt);
    void analyze_execute(Cursor& c);

    void attach_scope_outputs(const RelationRef& target,
                              const std::vector<std::string>& target_cols,
                              bool target_cols_known, const SelectScope& scope,
                              const std::set<ColumnBinding>& control_bindings);
    void enforce_column_closure();
};

RelationRef Analyzer::make_relation_ref(const std::vector<std::string>& name_parts,
                                        const CatalogObject** obj_out) {
    RelationRef ref;
    ref.key = object_key(name_parts);
    const CatalogObject* obj = lookup(ref.key);
    if (obj) {
        ref.generation = obj->generation;
        ref.is_view = obj->kind == ObjectKind::View;
    }
    if (obj_out) *obj_out = obj;
    return ref;
}

ResolvedSource Analyzer::resolve_source(const ParsedSource& src, int view_depth) {
    ResolvedSource out;
    out.alias = src.alias;

    if (src.subquery) {
        out.scope = std::make_shared<SelectScope>(
            resolve_select(*src.subquery, view_depth));
        out.columns = out.scope->columns;
        out.columns_known = !out.scope->unknown_star;
        return out;
    }

    const CatalogObject* obj = nullptr;
    out.ref = make_relation_ref(src.name, &obj);
    out.has_ref = true;
    std::string bare = src.name.back();
    std::transform(bare.begin(), bare.end(), bare.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    out.bare_name = bare;

    if (!obj) return out; // unbound reference; columns unknown

    if (obj->kind == ObjectKind::View && obj->definition_text) {
        if (view_depth >= opts_.max_view_depth) {
            suggest("view expansion depth exceeded at " + out.ref.key);
            return out;
        }
        std::vector<Token> tokens = lex(*obj->definition_text);
        std::size_t start = statement_start_index(tokens);
        Cursor c{tokens, start};
        if (c.cur().is("select")) {
            ParsedSelect sel = parse_select(c, 0);
            out.scope = std::make_shared<SelectScope>(
                resolve_select(sel, view_depth + 1));
            out.columns = out.scope->columns;
            out.columns_known = !out.scope->unknown_star;
            return out;
        }
        suggest("view definition not analyzable: " + out.ref.key);
        return out;
    }

    if (!obj->columns.empty()) {
        out.columns_known = true;
        out.columns.reserve(obj->columns.size());
        for (const auto& [name, _] : obj->columns) out.columns.push_back(name);
    }
    return out;
}

std::set<ColumnBinding> Analyzer::resolve_ref(const QualifiedRef& ref,
                                              std::vector<ResolvedSource>& sources,
                                              bool* resolved) {
    std::set<ColumnBinding> out;
    *resolved = true;

    auto bind_through = [&out, this](ResolvedSource& s, const std::string& col,
                                     bool* ok) {
        if (s.scope) {
            auto it = s.scope->col_sources.find(col);
            if (it != s.scope->col_sources.end()) {
                out.insert(it->second.begin(), it->second.end());
                if (s.has_ref) out.insert({s.ref, col}); // the view itself
                return;
            }
            if (s.has_ref) {
                out.insert({s.ref, col});
                *ok = false;
                return;
            }
            *ok = false;
            return;
        }
        if (s.has_ref) {
            if (s.columns_known) {
                bool present = std::find(s.columns.begin(), s.columns.end(), col) !=
                               s.columns.end();
                if (!present) *ok = false;
            }
            out.insert({s.ref, col});
            return;
        }
        *ok = false;
    };

    if (!ref.qualifier.empty()) {
        for (auto& s : sources) {
            if (s.alias == ref.qualifier ||
                (s.alias.empty() && s.bare_name == ref.qualifier)) {
                bind_through(s, ref.name, resolved);
                return out;
            }
        }
        *resolved = false;
        return out;
    }

    // Unqualified: prefer the unique source whose schema contains it.
    std::vector<ResolvedSource*> candidates;
    for (auto& s : sources) {
        if (s.columns_known || s.scope) {
            const auto& cols = s.scope ? s.scope->columns : s.columns;
            if (std::find(cols.begin(), cols.end(), ref.name) != cols.end()) {
                candidates.push_back(&s);
            }
        }
    }
    if (candidates.size() == 1) {
        bind_through(*candidates[0], ref.name, resolved);
        return out;
    }
    if (candidates.empty()) {
        std::vector<ResolvedSource*> unknown;
        for (auto& s : sources) {
            if (!s.columns_known && !s.scope) unknown.push_back(&s);
        }
        if (unknown.size() == 1 && sources.size() == 1) {
            bind_through(*unknown[0], ref.name, resolved);
            return out;
        }
        // ambiguous among unknown-schema sources: bind to all of them
        for (auto* s : unknown) bind_through(*s, ref.name, resolved);
        *resolved = false;
        return out;
    }
    // ambiguous among several known schemas
    for (auto* s : candidates) bind_through(*s, ref.name, resolved);
    *resolved = false;
    return out;
}

SelectScope Analyzer::resolve_select(const ParsedSelect& sel, int view_depth) {
    SelectScope scope;
    std::vector<ResolvedSource> sources;
    sources.reserve(sel.sources.size());
    for (const auto& src : sel.sources) {
        sources.push_back(resolve_source(src, view_depth));
    }

    for (const auto& s : sources) {
        if (s.has_ref) scope.base_inputs.push_back(s.ref);
        if (s.scope) {
            for (const auto& rel : s.scope->base_inputs)
                scope.base_inputs.push_back(rel);
            if (s.scope->suggested) scope.suggested = true;
        }
    }

    // Control refs resolve against this scope's own sources. Semijoin
    // subqueries contribute their relations as inputs; their columns stay
    // control-only.
    std::set<ColumnBinding> control_bindings;
    for (const auto& ref : sel.control_refs) {
        bool resolved = true;
        auto b = resolve_ref(ref, sources, &resolved);
        control_bindings.insert(b.begin(), b.end());
    }
    for (const auto& sub : sel.control_subqueries) {
        SelectScope s = resolve_select(*sub, view_depth);
        for (const auto& rel : s.base_inputs) scope.base_inputs.push_back(rel);
        if (s.suggested) scope.suggested = true;
    }

    int unnamed = 0;
    for (const auto& item : sel.items) {
        if (item.star) {
            bool matched = false;
            for (auto& s : sources) {
                if (!item.star_qualifier.empty() && s.alias != item.star_qualifier &&
                    s.bare_name != item.star_qualifier)
                    continue;
                matched = true;
                if (s.scope) {
                    for (const auto& col : s.scope->columns) {
                        scope.columns.push_back(col);
                        auto& dst = scope.col_sources[col];
                        auto it = s.scope->col_sources.find(col);
                        if (it != s.scope->col_sources.end())
                            dst.insert(it->second.begin(), it->second.end());
                        if (s.has_ref) dst.insert({s.ref, col});
                    }
                } else if (s.columns_known) {
                    for (const auto& col : s.columns) {
                        scope.columns.push_back(col);
                        scope.col_sources[col].insert({s.ref, col});
                    }
                } else {
                    scope.unknown_star = true;
                    scope.suggested = true;
                }
            }
            if (!matched) {
                scope.unknown_star = true;
                scope.suggested = true;
            }
            continue;
        }

        std::string name = item.alias;
        if (name.empty() && item.expr.refs.size() == 1)
            name = item.expr.refs.front().name;
        if (name.empty()) name = "col" + std::to_string(++unnamed);

        auto& dst = scope.col_sources[name];
        for (const auto& ref : item.expr.refs) {
            bool resolved = true;
            auto b = resolve_ref(ref, sources, &resolved);
            if (!resolved) scope.suggested = true;
            dst.insert(b.begin(), b.end());
        }
        for (const auto& sub : item.expr.subqueries) {
            SelectScope s = resolve_select(*sub, view_depth);
            for (const auto& rel : s.base_inputs) scope.base_inputs.push_back(rel);
            for (const auto& [_, bindings] : s.col_sources)
                dst.insert(bindings.begin(), bindings.end());
            if (s.suggested) scope.suggested = true;
        }
        if (opts_.include_control_columns) {
            dst.insert(control_bindings.begin(), control_bindings.end());
        }
        scope.columns.push_back(name);
    }
    return scope;
}

// Registers a select scope against a target relation: inputs, outputs,
// and the column map (target column <- contributing source columns).
void Analyzer::attach_scope_outputs(const RelationRef& target,
                                    const std::vector<std::string>& target_cols,
                                    bool target_cols_known,
                                    const SelectScope& scope,
                                    const std::set<ColumnBinding>& /*control*/) {
    for (const auto& rel : scope.base_inputs) add_input(rel);
    add_output(target);
    if (scope.suggested) suggest("");

    if (scope.unknown_star) {
        // Some source schema is unknown: relation-level lineage is exact,
        // columns default to all inputs affecting all outputs.
        out_.all_columns_fallback = true;
        suggest("unresolved schemas: all inputs assumed to affect all outputs");
    }

    // Pair output columns with scope columns positionally.
    const std::size_t n = std::min(target_cols.size(), scope.columns.size());
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& out_col = target_cols[i];
        auto it = scope.col_sources.find(scope.columns[i]);
        if (it == scope.col_sources.end()) continue;
        auto& dst = out_.column_map[column_id(target, out_col)];
        for (const auto& b : it->second) {
            dst.insert(column_id(b.rel, b.column));
        }
    }
    if (!target_cols_known && target_cols.size() != scope.columns.size()) {
        suggest("target column list inferred from the select list");
    }
}

void Analyzer::enforce_column_closure() {
    // Every mapped column must belong to a listed relation.
    std::unordered_set<std::string> input_ids, output_ids;
    for (const auto& rel : out_.inputs) input_ids.insert(rel.identity());
    for (const auto& rel : out_.outputs) output_ids.insert(rel.identity());

    auto relation_part = [](const std::string& col_id) {
        auto pos = col_id.rfind('#');
        return pos == std::string::npos ? col_id : col_id.substr(0, pos);
    };

    for (auto it = out_.column_map.begin(); it != out_.column_map.end();) {
        if (!output_ids.count(relation_part(it->first))) {
            it = out_.column_map.erase(it);
            continue;
        }
        auto& sources = it->second;
        for (auto sit = sources.begin(); sit != sources.end();) {
            if (!input_ids.count(relation_part(*sit))) {
                sit = sources.erase(sit);
            } else {
                ++sit;
            }
        }
        if (sources.empty()) {
            it = out_.column_map.erase(it);
        } else {
            ++it;
        }
    }
}

void Analyzer::analyze_select_statement(Cursor& c, std::string_view stmt) {
    ParsedSelect sel = parse_select(c, 0);
    SelectScope scope = resolve_select(sel, 0);

    if (sel.into) {
        // SELECT ... INTO <table>: creates and fills a new table.
        RelationRef target;
        target.key = object_key(*sel.into);
        target.generation = catalog_.next_generation(target.key);
        attach_scope_outputs(target, scope.columns, /*known=*/!scope.unknown_star,
                             scope, {});
        return;
    }

    if (!sel.sources.empty()) {
        RelationRef target;
        target.kind = RelationRef::Kind::QueryOutput;
        target.key = statement_identity_hash(stmt);
        attach_scope_outputs(target, scope.columns, /*known=*/!scope.unknown_star,
                             scope, {});
    }
    // SELECT without FROM (e.g. SELECT @@version) touches no datasets.
}

void Analyzer::analyze_insert(Cursor& c) {
    c.next(); // INSERT
    if (c.cur().is("into")) c.next();
    auto name = read_name(c);
    if (name.empty()) {
        suggest("INSERT without a target");
        return;
    }
    const CatalogObject* target_obj = nullptr;
    RelationRef target = make_relation_ref(name, &target_obj);

    // explicit column list?
    std::vector<std::string> target_cols;
    bool target_cols_known = false;
    if (c.cur().is_punct('(') && !c.peek().is("select")) {
        c.next();
        while (!c.done() && !c.cur().is_punct(')')) {
            if (c.cur().kind == TokenKind::Identifier)
                target_cols.push_back(c.cur().lower);
            c.next();
            if (c.cur().is_punct(',')) c.next();
        }
        if (c.cur().is_punct(')')) c.next();
        target_cols_known = true;
    } else if (target_obj && !target_obj->columns.empty()) {
        for (const auto& [col, _] : target_obj->columns) target_cols.push_back(col);
        target_cols_known = true;
    }

    if (c.cur().is("values") || c.cur().is("default")) {
        add_output(target);
        return; // literals only; no lineage inputs
    }
    if (c.cur().is("exec") || c.cur().is("execute")) {
        add_output(target);
        suggest("INSERT ... EXEC: procedure output not statically resolvable");
        return;
    }
    if (c.cur().is_punct('(') && c.peek().is("select")) c.next();
    if (c.cur().is("select")) {
        ParsedSelect sel = parse_select(c, 0);
        SelectScope scope = resolve_select(sel, 0);
        if (!target_cols_known) {
            target_cols = scope.columns;
        }
        attach_scope_outputs(target, target_cols,
                             target_cols_known || !scope.unknown_star, scope, {});
        if (!target_cols_known) {
            suggest("target schema unknown: column names taken from the select list");
        }
        return;
    }
    add_output(target);
    suggest("INSERT source not recognized");
}

void Analyzer::analyze_update(Cursor& c) {
    c.next(); // UPDATE
    if (c.cur().is("top")) {
        c.next();
        if (c.cur().is_punct('(')) {
            int paren = 0;
            do {
                if (c.cur().is_punct('(')) ++paren;
                if (c.cur().is_punct(')')) --paren;
                c.next();
            } while (!c.done() && paren > 0);
        }
    }
    auto target_name = read_name(c);
    if (target_name.empty() || !c.cur().is("set")) {
        suggest("unsupported UPDATE form");
        return;
    }
    c.next(); // SET

    struct Assignment {
        QualifiedRef lhs;
        ExprRefs rhs;
    };
    std::vector<Assignment> assignments;
    static const std::unordered_set<std::string_view> kSetStops = {
        "from", "where", "output", "option",
    };
    while (!c.done()) {
        if (c.cur().kind == TokenKind::Identifier && kSetStops.count(c.cur().lower))
            break;
        Assignment a;
        if (c.cur().kind == TokenKind::Variable) {
            // UPDATE T SET @v = col is a read; treat rhs refs as control
            c.next();
        } else {
            auto parts = read_name(c);
            if (parts.empty()) break;
            a.lhs.name = parts.back();
            std::transform(a.lhs.name.begin(), a.lhs.name.end(), a.lhs.name.begin(),
                           [](unsigned char ch) { return std::tolower(ch); });
        }
        if (!c.cur().is_punct('=')) {
            suggest("unsupported SET assignment");
            break;
        }
        c.next();
        a.rhs = scan_expression(c, 0, kSetStops);
        if (!a.lhs.name.empty()) assignments.push_back(std::move(a));
        if (c.cur().is_punct(',')) {
            c.next();
            continue;
        }
        break;
    }

    ParsedSelect tail;
    if (c.cur().is("output")) { // OUTPUT clause: skip to FROM/WHERE
        while (!c.done() && !c.cur().is("from") && !c.cur().is("where")) c.next();
    }
    if (c.cur().is("from")) {
        c.next();
        parse_source_list(c, 0, tail);
    }
    if (c.cur().is("where")) {
        c.next();
        scan_condition(c, 0, tail, kConditionStops);
    }

    std::vector<ResolvedSource> sources;
    for (const auto& src : tail.sources) sources.push_back(resolve_source(src, 0));

    // The update target may be an alias declared in FROM.
    RelationRef target;
    bool target_found = false;
    if (target_name.size() == 1) {
        std::string lower = target_name[0];
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char ch) { return std::tolower(ch); });
        for (const auto& s : sources) {
            if ((s.alias == lower || s.bare_name == lower) && s.has_ref) {
                target = s.ref;
                target_found = true;
                break;
            }
        }
    }
    if (!target_found) target = make_relation_ref(target_name);

    for (const auto& s : sources) {
        if (s.has_ref) add_input(s.ref);
        if (s.scope)
            for (const auto& rel : s.scope->base_inputs) add_input(rel);
    }
    add_output(target);

    std::set<ColumnBinding> control;
    for (const auto& ref : tail.control_refs) {
        bool resolved = true;
        auto b = resolve_ref(ref, sources, &resolved);
        control.insert(b.begin(), b.end());
    }
    for (const auto& sub : tail.control_subqueries) {
        SelectScope s = resolve_select(*sub, 0);
        for (const auto& rel : s.base_inputs) add_input(rel);
    }

    for (const auto& a : assignments) {
        auto& dst = out_.column_map[column_id(target, a.lhs.name)];
        for (const auto& ref : a.rhs.refs) {
            bool resolved = true;
            auto b = resolve_ref(ref, sources, &resolved);
            if (!resolved && sources.empty()) {
                // no FROM clause: self-referencing columns fall outside
                // the declared inputs and are dropped by closure
                continue;
            }
            if (!resolved) suggest("");
            for (const auto& bind : b) dst.insert(column_id(bind.rel, bind.column));
        }
        for (const auto& sub : a.rhs.subqueries) {
            SelectScope s = resolve_select(*sub, 0);
            for (const auto& rel : s.base_inputs) add_input(rel);
            for (const auto& [_, bindings] : s.col_sources)
                for (const auto& bind : bindings)
                    dst.insert(column_id(bind.rel, bind.column));
            if (s.suggested) suggest("");
        }
        if (opts_.include_control_columns) {
            for (const auto& bind : control)
                dst.insert(column_id(bind.rel, bind.column));
        }
    }
}

void Analyzer::analyze_delete(Cursor& c) {
    c.next(); // DELETE
    if (c.cur().is("top")) {
        c.next();
        if (c.cur().is_punct('(')) {
            int paren = 0;
            do {
                if (c.cur().is_punct('(')) ++paren;
                if (c.cur().is_punct(')')) --paren;
                c.next();
            } while (!c.done() && paren > 0);
        }
    }
    if (c.cur().is("from")) c.next();
    if (c.cur().is("table")) c.next(); // tolerated variant
    auto target_name = read_name(c);
    if (target_name.empty()) {
        suggest("DELETE without a target");
        return;
    }

    ParsedSelect tail;
    if (c.cur().is("output")) {
        while (!c.done() && !c.cur().is("from") && !c.cur().is("where")) c.next();
    }
    if (c.cur().is("from")) {
        c.next();
        parse_source_list(c, 0, tail);
    }
    if (c.cur().is("where")) {
        c.next();
        scan_condition(c, 0, tail, kConditionStops);
    }

    std::vector<ResolvedSource> sources;
    for (const auto& src : tail.sources) sources.push_back(resolve_source(src, 0));

    RelationRef target;
    bool target_found = false;
    if (target_name.size() == 1) {
        std::string lower = target_name[0];
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char ch) { return std::tolower(ch); });
        for (const auto& s : sources) {
            if ((s.alias == lower || s.bare_name == lower) && s.has_ref) {
                target = s.ref;
                target_found = true;
                break;
            }
        }
    }
    if (!target_found) target = make_relation_ref(target_name);

    for (const auto& s : sources) {
        if (s.has_ref) add_input(s.ref);
        if (s.scope)
            for (const auto& rel : s.scope->base_inputs) add_input(rel);
    }
    for (const auto& sub : tail.control_subqueries) {
        SelectScope s = resolve_select(*sub, 0);
        for (const auto& rel : s.base_inputs) add_input(rel);
    }
    add_output(target);
}

void Analyzer::analyze_merge(Cursor& c) {
    c.next(); // MERGE
    if (c.cur().is("into")) c.next();
    auto target_name = read_name(c);
    if (target_name.empty()) {
        suggest("MERGE without a target");
        return;
    }
    RelationRef target = make_relation_ref(target_name);
    std::string target_alias;
    if (c.cur().is("as")) c.next();
    if (c.cur().kind == TokenKind::Identifier && !c.cur().is("using")) {
        target_alias = c.cur().lower;
        c.next();
    }
    if (!c.cur().is("using")) {
        suggest("MERGE without USING");
        add_output(target);
        add_input(target);
        return;
    }
    c.next();

    ParsedSelect tail;
    parse_one_source(c, 0, tail);
    std::vector<ResolvedSource> sources;
    for (const auto& src : tail.sources) sources.push_back(resolve_source(src, 0));
    {
        // the target participates in matching and is an input by definition
        ResolvedSource t;
        t.alias = target_alias;
        t.bare_name = target.key.substr(target.key.find('.') + 1);
        t.has_ref = true;
        t.ref = target;
        const CatalogObject* obj = lookup(target.key);
        if (obj && !obj->columns.empty()) {
            t.columns_known = true;
            for (const auto& [col, _] : obj->columns) t.columns.push_back(col);
        }
        sources.push_back(std::move(t));
    }

    for (const auto& s : sources) {
        if (s.has_ref) add_input(s.ref);
        if (s.scope)
            for (const auto& rel : s.scope->base_inputs) add_input(rel);
    }
    add_output(target);

    if (c.cur().is("on")) {
        c.next();
        scan_condition(c, 0, tail, kConditionStops);
    }

    static const std::unordered_set<std::string_view> kMergeStops = {
        "when", "output", "option",
    };
    while (!c.done()) {
        if (!c.cur().is("when")) {
            c.next();
            continue;
        }
        while (!c.done() && !c.cur().is("then")) c.next();
        if (c.done()) break;
        c.next(); // THEN
        if (c.cur().is("update")) {
            c.next();
            if (c.cur().is("set")) c.next();
            while (!c.done() && !c.cur().is("when") && !c.cur().is_punct(';')) {
                auto parts = read_name(c);
                if (parts.empty() || !c.cur().is_punct('=')) break;
                c.next();
                std::string lhs = parts.back();
                std::transform(lhs.begin(), lhs.end(), lhs.begin(),
                               [](unsigned char ch) { return std::tolower(ch); });
                ExprRefs rhs = scan_expression(c, 0, kMergeStops);
                auto& dst = out_.column_map[column_id(target, lhs)];
                for (const auto& ref : rhs.refs) {
                    bool resolved = true;
                    auto b = resolve_ref(ref, sources, &resolved);
                    for (const auto& bind : b)
                        dst.insert(column_id(bind.rel, bind.column));
                    if (!resolved) suggest("");
                }
                if (c.cur().is_punct(',')) c.next();
            }
            continue;
        }
        if (c.cur().is("insert")) {
            c.next();
            std::vector<std::string> cols;
            if (c.cur().is_punct('(')) {
                c.next();
                while (!c.done() && !c.cur().is_punct(')')) {
                    if (c.cur().kind == TokenKind::Identifier)
                        cols.push_back(c.cur().lower);
                    c.next();
                    if (c.cur().is_punct(',')) c.next();
                }
                if (c.cur().is_punct(')')) c.next();
            }
            if (c.cur().is("values")) {
                c.next();
                if (c.cur().is_punct('(')) c.next();
                std::size_t idx = 0;
                while (!c.done() && !c.cur().is_punct(')')) {
                    ExprRefs val = scan_expression(c, 0, kMergeStops);
                    if (idx < cols.size()) {
                        auto& dst = out_.column_map[column_id(target, cols[idx])];
                        for (const auto& ref : val.refs) {
                            bool resolved = true;
                            auto b = resolve_ref(ref, sources, &resolved);
                            for (const auto& bind : b)
                                dst.insert(column_id(bind.rel, bind.column));
                            if (!resolved) suggest("");
                        }
                    }
                    ++idx;
                    if (c.cur().is_punct(',')) c.next();
                }
            }
            continue;
        }
        if (c.cur().is("delete")) {
            c.next();
            continue;
        }
        c.next();
    }
}

void Analyzer::analyze_bulk_insert(Cursor& c) {
    c.next(); // BULK
    if (c.cur().is("insert")) c.next();
    auto target_name = read_name(c);
    if (target_name.empty()) {
        suggest("BULK INSERT without a target");
        return;
    }
    RelationRef target = make_relation_ref(target_name);
    add_output(target);
    if (c.cur().is("from")) {
        c.next();
        if (c.cur().kind == TokenKind::String) {
            RelationRef file;
            file.kind = RelationRef::Kind::ExternalFile;
            file.key = c.cur().text;
            add_input(file);
            c.next();
            return;
        }
    }
    suggest("BULK INSERT without a source file");
}

void Analyzer::analyze_create(Cursor& c, std::string_view stmt) {
    c.next(); // CREATE
    if (c.cur().is("or")) {
        c.next();
        c.next();
    }
    if (c.cur().is("table")) {
        c.next();
        auto name = read_name(c);
        if (name.empty()) {
            suggest("CREATE TABLE without a name");
            return;
        }
        RelationRef target;
        target.key = object_key(name);
        target.generation = catalog_.next_generation(target.key);
        add_output(target);
        return;
    }
    if (c.cur().is("view")) {
        c.next();
        auto name = read_name(c);
        if (name.empty()) {
            suggest("CREATE VIEW without a name");
            return;
        }
        RelationRef target;
        target.key = object_key(name);
        target.generation = catalog_.next_generation(target.key);
        target.is_view = true;
        while (!c.done() && !c.cur().is("as")) c.next();
        if (c.cur().is("as")) c.next();
        if (c.cur().is("select")) {
            ParsedSelect sel = parse_select(c, 0);
            SelectScope scope = resolve_select(sel, 0);
            attach_scope_outputs(target, scope.columns, !scope.unknown_star, scope,
                                 {});
            return;
        }
        add_output(target);
        suggest("CREATE VIEW definition not analyzable");
        return;
    }
    if (c.cur().is("procedure") || c.cur().is("proc") || c.cur().is("function") ||
        c.cur().is("trigger")) {
        // code objects: no data flow at definition time
        (void)stmt;
        return;
    }
    if (c.cur().is("index") || c.cur().is("unique") || c.cur().is("clustered") ||
        c.cur().is("nonclustered") || c.cur().is("statistics")) {
        return; // physical-design statements carry no lineage
    }
    suggest("unsupported CREATE " + c.cur().lower);
}

void Analyzer::analyze_execute(Cursor& c) {
    c.next(); // EXEC
    if (c.cur().is_punct('(') || c.cur().kind == TokenKind::Variable ||
        c.cur().kind == TokenKind::String) {
        suggest("dynamic SQL execution is not statically resolvable");
        return;
    }
    // EXECUTE <proc> args: runtime extraction owns the process entities;
    // the spawned statements carry the lineage.
}

StatementProvenance Analyzer::analyze(std::string_view stmt) {
    std::vector<Token> tokens = lex(stmt);
    std::size_t start = statement_start_index(tokens);
    Cursor c{tokens, start};

    const Token& head = c.cur();
    if (head.kind != TokenKind::Identifier) {
        if (head.kind != TokenKind::End) {
            suggest("statement not recognized");
        }
        enforce_column_closure();
        return std::move(out_);
    }

    if (head.is("select")) {
        analyze_select_statement(c, stmt);
    } else if (head.is("insert")) {
        analyze_insert(c);
    } else if (head.is("update")) {
        if (c.peek().is("statistics")) {
            // maintenance statement, no lineage
        } else {
            analyze_update(c);
        }
    } else if (head.is("delete")) {
        analyze_delete(c);
    } else if (head.is("merge")) {
        analyze_merge(c);
    } else if (head.is("bulk")) {
        analyze_bulk_insert(c);
    } else if (head.is("truncate")) {
        c.next();
        if (c.cur().is("table")) c.next();
        auto name = read_name(c);
        if (!name.empty()) add_output(make_relation_ref(name));
    } else if (head.is("create")) {
        analyze_create(c, stmt);
    } else if (head.is("exec") || head.is("execute")) {
        analyze_execute(c);
    } else if (head.is("drop") || head.is("alter") || head.is("set") ||
               head.is("declare") || head.is("print") || head.is("use") ||
               head.is("begin") || head.is("commit") || head.is("rollback") ||
               head.is("waitfor") || head.is("return") || head.is("break") ||
               head.is("continue") || head.is("grant") || head.is("revoke") ||
               head.is("deny") || head.is("checkpoint") || head.is("open") ||
               head.is("close") || head.is("fetch") || head.is("deallocate") ||
               head.is("end") || head.is("goto")) {
        // recognized statements without table-level data flow
    } else if (head.is("dbcc") || head.is("backup") || head.is("restore") ||
               head.is("kill")) {
        // administrative commands
    } else {
        suggest("unsupported statement: " + head.lower);
    }

    enforce_column_closure();
    return std::move(out_);
}

} // namespace

StatementProvenance analyze_statement(std::string_view stmt,
                                      const CatalogState& catalog,
                                      BindingMode mode,
                                      const AnalyzerOptions& opts,
                                      const BindingOverlay* bindings) {
    Analyzer analyzer(catalog, mode, opts, bindings);
    return analyzer.analyze(stmt);
}

std::string statement_identity_hash(std::string_view stmt) {
    return to_hex(fnv1a64(normalize_sql(stmt, /*mask_literals=*/false)));
}

std::optional<std::vector<std::string>> executed_procedure(std::string_view stmt) {
    std::vector<Token> tokens = lex(stmt);
    std::size_t start = statement_start_index(tokens);
    Cursor c{tokens, start};
    if (!c.cur().is("exec") && !c.cur().is("execute")) return std::nullopt;
    c.next();
    if (c.cur().kind != TokenKind::Identifier) return std::nullopt;
    if (c.cur().is("sp_executesql")) return std::nullopt; // dynamic SQL
    auto name = read_name(c);
    if (name.empty()) return std::nullopt;
    return name;
}

bool statement_accesses_datasets(std::string_view stmt) {
    std::vector<Token> tokens = lex(stmt);
    std::size_t start = statement_start_index(tokens);
    Cursor c{tokens, start};
    const Token& head = c.cur();
    if (head.kind != TokenKind::Identifier) return false;

    if (head.is("insert") || head.is("update") || head.is("delete") ||
        head.is("merge") || head.is("bulk") || head.is("truncate") ||
        head.is("create") || head.is("drop") || head.is("alter") ||
        head.is("exec") || head.is("execute")) {
        if (head.is("update") && c.peek().is("statistics")) return false;
        return true;
    }
    if (head.is("select")) {
        int depth = 0;
        for (std::size_t i = start; i < tokens.size(); ++i) {
            const Token& t = tokens[i];
            if (t.is_punct('(')) ++depth;
            else if (t.is_punct(')')) --depth;
            else if (depth == 0 && (t.is("from") || t.is("into"))) return true;
        }
        return false;
    }
    return false;
}

} // namespace provtrace::sql
