#include "provtrace/filters.hpp"

#include "provtrace/errors.hpp"
#include "provtrace/hash.hpp"
#include "provtrace/runtime_extractor.hpp"
#include "provtrace/sql_analyzer.hpp"
#include "provtrace/sql_lexer.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <regex>
#include <unordered_map>
#include <unordered_set>

namespace provtrace {

namespace {

// '%' matches any run of characters; everything else is literal.
bool glob_match(std::string_view pattern, std::string_view text) {
    std::size_t p = 0, t = 0;
    std::size_t star = std::string_view::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && pattern[p] == '%') {
            star = p++;
            mark = t;
        } else if (p < pattern.size() && pattern[p] == text[t]) {
            ++p;
            ++t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '%') ++p;
    return p == pattern.size();
}

std::string head_keyword(const std::string& stmt) {
    std::vector<sql::Token> tokens = sql::lex(stmt);
    std::size_t start = sql::statement_start_index(tokens);
    if (start >= tokens.size() ||
        tokens[start].kind != sql::TokenKind::Identifier)
        return {};
    return tokens[start].lower;
}

bool type_matches(const std::string& type_pattern, const std::string& head) {
    if (head.empty()) return false;
    if (type_pattern == head) return true;
    if (type_pattern == "ddl") {
        return head == "create" || head == "drop" || head == "alter" ||
               head == "truncate";
    }
    if (type_pattern == "dml" || type_pattern == "crud") {
        return head == "insert" || head == "update" || head == "delete" ||
               head == "merge" || head == "bulk";
    }
    if (type_pattern == "exec") return head == "execute";
    if (type_pattern == "execute") return head == "exec";
    return false;
}

} // namespace

// ---------------------------------------------------------------------
// Metadata predicate expressions
// ---------------------------------------------------------------------

struct MetadataExpr::Node {
    enum class Op { And, Or, Not, Cmp };
    Op op{Op::Cmp};
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;

    std::string field;
    std::string cmp; // "=", "!=", "<", "<=", ">", ">=", "like"
    bool string_value{false};
    std::string str_value; // lowercase
    std::int64_t int_value{0};
};

namespace {

using ExprNode = MetadataExpr::Node;
using NodePtr = std::shared_ptr<const ExprNode>;

std::optional<std::string> string_field(const QueryEvent& e,
                                        const std::string& field) {
    if (field == "username") return e.metadata.username;
    if (field == "client_app_name") return e.metadata.client_app_name;
    if (field == "client_host") return e.metadata.client_host;
    if (field == "server_name") return e.metadata.server_name;
    if (field == "database_name") return e.metadata.database_name;
    if (field == "query_text") return e.query_text;
    if (field == "activity_id") return e.activity_id;
    if (field == "kind") return std::string(to_string(e.kind));
    if (field == "class") return std::string(to_string(e.klass));
    return std::nullopt;
}

std::optional<std::optional<std::int64_t>> int_field(const QueryEvent& e,
                                                     const std::string& field) {
    if (field == "cpu_time_us") return e.metadata.cpu_time_us;
    if (field == "duration_us") return e.metadata.duration_us;
    if (field == "rows_inserted") return e.metadata.rows_inserted;
    if (field == "rows_updated") return e.metadata.rows_updated;
    if (field == "rows_deleted") return e.metadata.rows_deleted;
    if (field == "rows_returned") return e.metadata.rows_returned;
    if (field == "ts") return std::optional<std::int64_t>(e.ts);
    if (field == "seq") return std::optional<std::int64_t>(static_cast<std::int64_t>(e.seq));
    return std::nullopt;
}

bool node_defined(const ExprNode& n, const QueryEvent& e) {
    switch (n.op) {
    case ExprNode::Op::And:
    case ExprNode::Op::Or:
        return node_defined(*n.lhs, e) && node_defined(*n.rhs, e);
    case ExprNode::Op::Not:
        return node_defined(*n.lhs, e);
    case ExprNode::Op::Cmp: {
        if (string_field(e, n.field)) return true;
        auto iv = int_field(e, n.field);
        return iv.has_value() && iv->has_value();
    }
    }
    return false;
}

bool node_eval(const ExprNode& n, const QueryEvent& e) {
    switch (n.op) {
    case ExprNode::Op::And: return node_eval(*n.lhs, e) && node_eval(*n.rhs, e);
    case ExprNode::Op::Or: return node_eval(*n.lhs, e) || node_eval(*n.rhs, e);
    case ExprNode::Op::Not: return !node_eval(*n.lhs, e);
    case ExprNode::Op::Cmp: break;
    }

    if (auto sv = string_field(e, n.field)) {
        std::string lower = *sv;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (n.cmp == "=") return lower == n.str_value;
        if (n.cmp == "!=") return lower != n.str_value;
        if (n.cmp == "like") return glob_match(n.str_value, lower);
        return false;
    }
    auto iv = int_field(e, n.field);
    if (!iv || !iv->has_value()) return false;
    const std::int64_t v = **iv;
    if (n.cmp == "=") return v == n.int_value;
    if (n.cmp == "!=") return v != n.int_value;
    if (n.cmp == "<") return v < n.int_value;
    if (n.cmp == "<=") return v <= n.int_value;
    if (n.cmp == ">") return v > n.int_value;
    if (n.cmp == ">=") return v >= n.int_value;
    return false;
}

struct PredParser {
    const std::vector<sql::Token>& tokens;
    std::size_t i{0};

    const sql::Token& cur() const { return tokens[std::min(i, tokens.size() - 1)]; }
    void next() {
        if (i + 1 < tokens.size()) ++i;
    }
    bool done() const { return cur().kind == sql::TokenKind::End; }

    NodePtr parse_or() {
        NodePtr lhs = parse_and();
        while (cur().is("or")) {
            next();
            auto node = std::make_shared<ExprNode>();
            node->op = ExprNode::Op::Or;
            node->lhs = lhs;
            node->rhs = parse_and();
            lhs = node;
        }
        return lhs;
    }

    NodePtr parse_and() {
        NodePtr lhs = parse_unary();
        while (cur().is("and")) {
            next();
            auto node = std::make_shared<ExprNode>();
            node->op = ExprNode::Op::And;
            node->lhs = lhs;
            node->rhs = parse_unary();
            lhs = node;
        }
        return lhs;
    }

    NodePtr parse_unary() {
        if (cur().is("not")) {
            next();
            auto node = std::make_shared<ExprNode>();
            node->op = ExprNode::Op::Not;
            node->lhs = parse_unary();
            return node;
        }
        if (cur().is_punct('(')) {
            next();
            NodePtr inner = parse_or();
            if (!cur().is_punct(')')) throw ConfigError("expected ')' in predicate");
            next();
            return inner;
        }
        return parse_cmp();
    }

    NodePtr parse_cmp() {
        if (cur().kind != sql::TokenKind::Identifier) {
            throw ConfigError("expected field name in predicate");
        }
        auto node = std::make_shared<ExprNode>();
        node->op = ExprNode::Op::Cmp;
        node->field = cur().lower;
        next();

        if (cur().is("like")) {
            node->cmp = "like";
            next();
        } else if (cur().kind == sql::TokenKind::Punct) {
            std::string op = cur().text;
            next();
            if (cur().kind == sql::TokenKind::Punct &&
                (cur().text == "=" || cur().text == ">")) {
                op += cur().text;
                next();
            }
            if (op == "<>") op = "!=";
            if (op != "=" && op != "!=" && op != "<" && op != "<=" && op != ">" &&
                op != ">=") {
                throw ConfigError("unsupported operator in predicate: " + op);
            }
            node->cmp = op;
        } else {
            throw ConfigError("expected comparison operator in predicate");
        }

        if (cur().kind == sql::TokenKind::String) {
            node->string_value = true;
            node->str_value = cur().lower;
            next();
        } else if (cur().kind == sql::TokenKind::Number) {
            node->int_value = std::stoll(cur().text);
            next();
        } else if (cur().kind == sql::TokenKind::Punct && cur().text == "-") {
            next();
            if (cur().kind != sql::TokenKind::Number)
                throw ConfigError("expected number after '-'");
            node->int_value = -std::stoll(cur().text);
            next();
        } else {
            throw ConfigError("expected literal value in predicate");
        }
        return node;
    }
};

} // namespace

MetadataExpr MetadataExpr::parse(const std::string& text) {
    std::vector<sql::Token> tokens = sql::lex(text);
    PredParser parser{tokens};
    MetadataExpr expr;
    expr.root_ = parser.parse_or();
    if (!parser.done()) throw ConfigError("trailing input in predicate: " + text);
    expr.text_ = text;
    return expr;
}

bool MetadataExpr::defined_for(const QueryEvent& e) const {
    return root_ && node_defined(*root_, e);
}

bool MetadataExpr::eval(const QueryEvent& e) const {
    return root_ && node_eval(*root_, e);
}

// ---------------------------------------------------------------------
// Query routing
// ---------------------------------------------------------------------

struct QueryRouter::Impl {
    struct Compiled {
        PatternKind kind;
        QueryRoute route;
        std::string value;           // type keyword or normalized glob
        std::optional<std::regex> re;
    };
    std::vector<Compiled> patterns;
    mutable std::unordered_map<std::uint64_t, QueryRoute> cache;
};

QueryRouter::QueryRouter(const FilterConfig& cfg) : impl_(new Impl) {
    for (const auto& p : cfg.patterns) {
        Impl::Compiled c;
        c.kind = p.kind;
        c.route = p.route;
        switch (p.kind) {
        case PatternKind::Type: {
            c.value = p.pattern;
            std::transform(c.value.begin(), c.value.end(), c.value.begin(),
                           [](unsigned char ch) { return std::tolower(ch); });
            break;
        }
        case PatternKind::SyntaxTemplate:
            c.value = sql::normalize_sql(p.pattern, /*mask_literals=*/false);
            break;
        case PatternKind::Regex:
            try {
                c.re.emplace(p.pattern,
                             std::regex::icase | std::regex::ECMAScript |
                                 std::regex::optimize);
            } catch (const std::regex_error& err) {
                throw ConfigError("bad filter regex '" + p.pattern +
                                  "': " + err.what());
            }
            break;
        case PatternKind::NoDatasetAccess:
            break;
        }
        impl_->patterns.push_back(std::move(c));
    }
}

QueryRouter::~QueryRouter() = default;
QueryRouter::QueryRouter(QueryRouter&&) noexcept = default;
QueryRouter& QueryRouter::operator=(QueryRouter&&) noexcept = default;

QueryRoute QueryRouter::route(const std::string& stmt) const {
    if (impl_->patterns.empty()) return QueryRoute::Full;

    const std::uint64_t key = fnv1a64(stmt);
    auto hit = impl_->cache.find(key);
    if (hit != impl_->cache.end()) return hit->second;

    QueryRoute result = QueryRoute::Full;
    std::string head;
    std::string normalized;
    bool scanned = false;

    for (const auto& p : impl_->patterns) {
        bool matched = false;
        switch (p.kind) {
        case PatternKind::Type:
            if (head.empty()) head = head_keyword(stmt);
            matched = type_matches(p.value, head);
            break;
        case PatternKind::SyntaxTemplate:
            if (normalized.empty())
                normalized = sql::normalize_sql(stmt, /*mask_literals=*/false);
            matched = glob_match(p.value, normalized);
            break;
        case PatternKind::Regex:
            matched = p.re && std::regex_search(stmt, *p.re);
            break;
        case PatternKind::NoDatasetAccess:
            if (!scanned) scanned = true;
            matched = !sql::statement_accesses_datasets(stmt);
            break;
        }
        if (matched) {
            result = p.route;
            break;
        }
    }
    if (impl_->cache.size() < 200000) impl_->cache.emplace(key, result);
    return result;
}

QueryRoute route_query(const std::string& stmt, const FilterConfig& cfg) {
    return QueryRouter(cfg).route(stmt);
}

std::vector<QueryPattern> parse_pattern_lines(std::string_view text) {
    std::vector<QueryPattern> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(
            pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

        while (!line.empty() && (line.front() == ' ' || line.front() == '\t'))
            line.remove_prefix(1);
        while (!line.empty() &&
               (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;

        auto first = line.find('|');
        auto second = first == std::string_view::npos
                          ? std::string_view::npos
                          : line.find('|', first + 1);
        if (second == std::string_view::npos) {
            throw ConfigError("bad pattern line (want route|kind|pattern): " +
                              std::string(line));
        }
        std::string route(line.substr(0, first));
        std::string kind(line.substr(first + 1, second - first - 1));
        QueryPattern p;
        p.pattern = std::string(line.substr(second + 1));
        if (route == "drop") p.route = QueryRoute::Drop;
        else if (route == "runtime_only") p.route = QueryRoute::RuntimeOnly;
        else if (route == "full") p.route = QueryRoute::Full;
        else throw ConfigError("bad pattern route: " + route);
        if (kind == "type") p.kind = PatternKind::Type;
        else if (kind == "template") p.kind = PatternKind::SyntaxTemplate;
        else if (kind == "regex") p.kind = PatternKind::Regex;
        else if (kind == "no_dataset_access") p.kind = PatternKind::NoDatasetAccess;
        else throw ConfigError("bad pattern kind: " + kind);
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------
// Loop compression
// ---------------------------------------------------------------------

namespace {

constexpr std::size_t kMaxLoopPeriod = 32;

void compress_node(const QueryTree& tree, QueryTreeNode& parent, int k) {
    auto& children = parent.children;
    const std::size_t n = children.size();
    if (n >= 2) {
        std::vector<std::string> texts;
        texts.reserve(n);
        for (const auto& child : children) {
            texts.push_back(
                sql::normalize_sql(tree.started(*child).query_text, true));
        }

        std::vector<bool> keep(n, true);
        std::vector<std::uint32_t> annotate(n, 0);
        std::size_t i = 0;
        while (i < n) {
            std::size_t best_p = 0, best_r = 0;
            for (std::size_t p = 1; p <= kMaxLoopPeriod && i + 2 * p <= n; ++p) {
                std::size_t r = 1;
                while (i + (r + 1) * p <= n) {
                    bool eq = true;
                    for (std::size_t q = 0; q < p && eq; ++q) {
                        eq = texts[i + r * p + q] == texts[i + q];
                    }
                    if (!eq) break;
                    ++r;
                }
                if (r >= 2) {
                    best_p = p; // smallest period wins
                    best_r = r;
                    break;
                }
            }
            if (best_r >= 2) {
                const std::size_t keep_reps =
                    std::min<std::size_t>(static_cast<std::size_t>(k), best_r);
                if (keep_reps < best_r) {
                    for (std::size_t rep = 0; rep < best_r - keep_reps; ++rep) {
                        for (std::size_t q = 0; q < best_p; ++q) {
                            keep[i + rep * best_p + q] = false;
                        }
                    }
                    for (std::size_t rep = best_r - keep_reps; rep < best_r; ++rep) {
                        for (std::size_t q = 0; q < best_p; ++q) {
                            annotate[i + rep * best_p + q] =
                                static_cast<std::uint32_t>(best_r);
                        }
                    }
                }
                i += best_p * best_r;
            } else {
                ++i;
            }
        }

        std::vector<std::unique_ptr<QueryTreeNode>> survivors;
        survivors.reserve(n);
        for (std::size_t idx = 0; idx < n; ++idx) {
            if (!keep[idx]) continue;
            if (annotate[idx] > 0) children[idx]->compressed_iterations = annotate[idx];
            survivors.push_back(std::move(children[idx]));
        }
        children = std::move(survivors);
    }

    for (auto& child : children) compress_node(tree, *child, k);
}

} // namespace

void loop_compress(QueryTree& tree, std::optional<int> k) {
    if (!k || !tree.root) return; // unlimited iterations: identity
    compress_node(tree, *tree.root, std::max(1, *k));
}

// ---------------------------------------------------------------------
// Routing application and activity filters
// ---------------------------------------------------------------------

namespace {

bool route_subtree(const QueryTree& tree, QueryTreeNode& node,
                   const QueryRouter& router, bool& any_full) {
    QueryRoute route = router.route(tree.started(node).query_text);
    if (route == QueryRoute::Drop && node.parent != nullptr) {
        return false; // prune this subtree
    }
    node.route = route == QueryRoute::RuntimeOnly ? NodeRoute::RuntimeOnly
                                                  : NodeRoute::Full;
    if (route == QueryRoute::Drop) {
        // root: never pruned, but it contributes nothing
        node.route = NodeRoute::RuntimeOnly;
    } else if (route == QueryRoute::Full) {
        any_full = true;
    }

    auto& children = node.children;
    children.erase(std::remove_if(children.begin(), children.end(),
                                  [&](std::unique_ptr<QueryTreeNode>& child) {
                                      return !route_subtree(tree, *child, router,
                                                            any_full);
                                  }),
                   children.end());
    return true;
}

} // namespace

bool apply_query_routes(QueryTree& tree, const QueryRouter& router) {
    if (!tree.root) return false;
    bool any_full = false;
    route_subtree(tree, *tree.root, router, any_full);
    return any_full;
}

bool keep_activity(const QueryTree& tree, const FilterConfig& cfg) {
    if (!tree.root) return false;

    bool any_full = false;
    for_each_node(*tree.root, [&any_full](const QueryTreeNode& node) {
        if (node.route == NodeRoute::Full) any_full = true;
    });
    if (!any_full) return false;

    for (const auto& pred : cfg.drop_activity_predicates) {
        std::size_t domain = 0, matched = 0;
        for (const auto& e : tree.activity.events) {
            if (!pred.expr.defined_for(e)) continue;
            ++domain;
            if (pred.expr.eval(e)) ++matched;
        }
        const bool fires = pred.quantifier == PredicateQuantifier::Any
                               ? matched > 0
                               : domain > 0 && matched == domain;
        if (fires) return false;
    }
    return true;
}

// ---------------------------------------------------------------------
// Last-K admission
// ---------------------------------------------------------------------

std::vector<QueryTree> admit_last_k_runs(std::vector<QueryTree> batch,
                                         std::optional<int> K,
                                         const FilterConfig& cfg) {
    if (!K) return batch;
    const std::size_t k = static_cast<std::size_t>(std::max(1, *K));

    struct Exec {
        std::int64_t ts;
        std::uint64_t seq;
        std::size_t tree_idx;
        const QueryTreeNode* node;
    };
    std::unordered_map<std::string, std::vector<Exec>> executions;

    for (std::size_t idx = 0; idx < batch.size(); ++idx) {
        QueryTree& tree = batch[idx];
        if (!tree.root) continue;
        for_each_node(*tree.root, [&](const QueryTreeNode& node) {
            if (node.route != NodeRoute::Full) return;
            const QueryEvent& started = tree.started(node);
            executions[node_static_identity(tree, node)].push_back(
                {started.ts, started.seq, idx, &node});
        });
    }

    // Pass 1: per interesting query, its last K executions in the batch.
    std::unordered_set<std::size_t> admitted_trees;
    std::unordered_set<const QueryTreeNode*> admitted_nodes;
    for (auto& [identity, execs] : executions) {
        std::sort(execs.begin(), execs.end(), [](const Exec& a, const Exec& b) {
            return a.ts != b.ts ? a.ts > b.ts : a.seq > b.seq;
        });
        for (std::size_t i = 0; i < execs.size() && i < k; ++i) {
            admitted_trees.insert(execs[i].tree_idx);
            admitted_nodes.insert(execs[i].node);
        }
    }

    // Pass 2: keep admitted activities; optionally prune stale
    // interesting nodes inside them.
    std::vector<QueryTree> out;
    out.reserve(admitted_trees.size());
    for (std::size_t idx = 0; idx < batch.size(); ++idx) {
        if (!admitted_trees.count(idx)) continue;
        QueryTree& tree = batch[idx];
        if (!cfg.keep_context && tree.root) {
            std::function<void(QueryTreeNode&)> prune = [&](QueryTreeNode& node) {
                auto& children = node.children;
                children.erase(
                    std::remove_if(children.begin(), children.end(),
                                   [&](const std::unique_ptr<QueryTreeNode>& c) {
                                       return c->route == NodeRoute::Full &&
                                              !admitted_nodes.count(c.get());
                                   }),
                    children.end());
                for (auto& child : children) prune(*child);
            };
            prune(*tree.root);
        }
        out.push_back(std::move(tree));
    }
    return out;
}

// ---------------------------------------------------------------------
// Aggregation level dropping
// ---------------------------------------------------------------------

namespace {

std::optional<EmitLevel> level_of(EntityType type) {
    switch (type) {
    case EntityType::AdhocStatement:
    case EntityType::AdhocStatementRun:
    case EntityType::SpStatement:
    case EntityType::SpStatementRun:
        return EmitLevel::Statement;
    case EntityType::Batch:
    case EntityType::BatchRun:
        return EmitLevel::Batch;
    case EntityType::StoredProcedure:
    case EntityType::StoredProcedureRun:
        return EmitLevel::Procedure;
    default:
        return std::nullopt;
    }
}

} // namespace

ProvenanceGraph drop_aggregation_levels(ProvenanceGraph g,
                                        const std::set<EmitLevel>& levels) {
    std::unordered_set<Guid> removed;
    for (const auto& [guid, entity] : g.entities) {
        auto level = level_of(entity.type);
        if (level && !levels.count(*level)) removed.insert(guid);
    }
    if (removed.empty()) return g;

    // SpawnedBy contraction through removed runs.
    std::unordered_map<Guid, Guid> parent_of;
    for (const auto& rel : g.relationships) {
        if (rel.type == RelationshipType::SpawnedBy) parent_of[rel.from] = rel.to;
    }
    auto nearest_retained = [&](Guid run) -> std::optional<Guid> {
        auto it = parent_of.find(run);
        while (it != parent_of.end()) {
            if (!removed.count(it->second)) return it->second;
            it = parent_of.find(it->second);
        }
        return std::nullopt;
    };

    std::set<Relationship> rels;
    for (const auto& rel : g.relationships) {
        const bool from_removed = removed.count(rel.from) > 0;
        const bool to_removed = removed.count(rel.to) > 0;
        if (!from_removed && !to_removed) {
            rels.insert(rel);
            continue;
        }
        if (rel.type == RelationshipType::SpawnedBy && !from_removed && to_removed) {
            if (auto ancestor = nearest_retained(rel.to)) {
                rels.insert({RelationshipType::SpawnedBy, rel.from, *ancestor});
            }
        }
    }

    for (const Guid& guid : removed) g.entities.erase(guid);
    g.relationships = std::move(rels);

    // Connections that no longer anchor any run.
    std::unordered_set<Guid> referenced;
    for (const auto& rel : g.relationships) {
        if (rel.type == RelationshipType::ConnectionOf) referenced.insert(rel.to);
    }
    for (auto it = g.entities.begin(); it != g.entities.end();) {
        if (it->second.type == EntityType::ClientConnection &&
            !referenced.count(it->first)) {
            it = g.entities.erase(it);
        } else {
            ++it;
        }
    }
    return g;
}

// ---------------------------------------------------------------------
// Event buffer simulation
// ---------------------------------------------------------------------

std::vector<QueryEvent> simulate_event_buffer(std::vector<QueryEvent> events,
                                              std::int64_t buffer_bytes,
                                              double drain_bytes_per_sec) {
    if (events.empty() || buffer_bytes <= 0) return events;

    std::sort(events.begin(), events.end(),
              [](const QueryEvent& a, const QueryEvent& b) {
                  return a.ts != b.ts ? a.ts < b.ts : a.seq < b.seq;
              });

    struct Buffered {
        std::size_t idx;
        std::int64_t remaining;
    };
    std::deque<Buffered> buffer;
    std::int64_t buffered_bytes = 0;
    double drain_credit = 0.0;
    std::int64_t last_ts = events.front().ts;
    std::vector<bool> delivered(events.size(), false);

    auto drain = [&](std::int64_t now) {
        if (drain_bytes_per_sec <= 0) return;
        drain_credit += (static_cast<double>(now - last_ts) / 1e6) *
                        drain_bytes_per_sec;
        last_ts = now;
        while (!buffer.empty() &&
               drain_credit >= static_cast<double>(buffer.front().remaining)) {
            drain_credit -= static_cast<double>(buffer.front().remaining);
            buffered_bytes -= buffer.front().remaining;
            delivered[buffer.front().idx] = true;
            buffer.pop_front();
        }
        if (buffer.empty()) drain_credit = 0.0; // nothing to pre-drain
    };

    for (std::size_t i = 0; i < events.size(); ++i) {
        const std::int64_t size =
            static_cast<std::int64_t>(serialize_event(events[i]).size()) + 1;
        drain(events[i].ts);
        if (size > buffer_bytes) continue; // larger than the whole buffer
        while (!buffer.empty() && buffered_bytes + size > buffer_bytes) {
            // overflow: drop oldest
            buffered_bytes -= buffer.front().remaining;
            buffer.pop_front();
        }
        buffer.push_back({i, size});
        buffered_bytes += size;
    }
    for (const auto& b : buffer) delivered[b.idx] = true; // final drain

    std::vector<QueryEvent> kept;
    kept.reserve(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (delivered[i]) kept.push_back(std::move(events[i]));
    }
    return kept;
}

} // namespace provtrace
