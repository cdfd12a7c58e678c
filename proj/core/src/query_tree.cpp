#include "provtrace/query_tree.hpp"

#include "provtrace/errors.hpp"
#include "provtrace/hash.hpp"

#include <algorithm>
#include <cctype>

namespace provtrace {

std::uint64_t activity_fingerprint(const std::vector<QueryEvent>& events) {
    std::uint64_t h = kFnv64Offset;
    for (const auto& e : events) {
        h = fnv1a64_mix(static_cast<std::uint64_t>(e.ts), h);
        h = fnv1a64_mix(e.seq, h);
    }
    return h;
}

std::size_t QueryTree::node_count() const {
    std::size_t n = 0;
    if (root) for_each_node(*root, [&n](const QueryTreeNode&) { ++n; });
    return n;
}

namespace {

bool text_starts_with_exec(const std::string& text) {
    std::size_t i = 0;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
    std::string word(text, i, j - i);
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return word == "exec" || word == "execute";
}

bool starts_subtree(const QueryEvent& e, const TreeBuildOptions& opts) {
    if (!opts.strict_subtree) return true;
    return e.klass == EventClass::SqlBatch || text_starts_with_exec(e.query_text);
}

} // namespace

QueryTree build_query_tree(Activity activity, const TreeBuildOptions& opts) {
    QueryTree tree;
    tree.activity = std::move(activity);
    const auto& events = tree.activity.events;

    struct StackEntry {
        std::size_t event_idx;
        QueryTreeNode* node;
    };
    std::vector<StackEntry> stack;
    QueryTreeNode* cur_parent = nullptr;

    for (std::size_t i = 0; i < events.size(); ++i) {
        const QueryEvent& e = events[i];
        if (!is_tree_event(e)) continue;

        if (e.kind == EventKind::Started) {
            auto node = std::make_unique<QueryTreeNode>();
            node->started_idx = i;
            QueryTreeNode* raw = node.get();
            if (stack.empty()) {
                if (tree.root) {
                    throw MalformedActivity(
                        "activity " + tree.activity.activity_id +
                        ": second root-level started event");
                }
                node->node_id = "0";
                tree.root = std::move(node);
                cur_parent = raw;
            } else {
                QueryTreeNode* parent = cur_parent;
                node->parent = parent;
                node->node_id =
                    parent->node_id + "." + std::to_string(parent->children.size());
                parent->children.push_back(std::move(node));
                if (starts_subtree(e, opts)) cur_parent = raw;
            }
            stack.push_back({i, raw});
        } else {
            if (stack.empty()) {
                throw MalformedActivity(
                    "activity " + tree.activity.activity_id +
                    ": completed event without a matching started event");
            }
            StackEntry top = stack.back();
            stack.pop_back();
            const QueryEvent& se = events[top.event_idx];
            if (se.klass != e.klass || se.activity_id != e.activity_id) {
                throw MalformedActivity(
                    "activity " + tree.activity.activity_id +
                    ": completed event matches a started event of a different type");
            }
            top.node->completed_idx = i;
            if (starts_subtree(se, opts)) cur_parent = top.node->parent;
        }
    }

    if (!stack.empty()) {
        throw MalformedActivity("activity " + tree.activity.activity_id +
                                ": " + std::to_string(stack.size()) +
                                " started event(s) never completed");
    }
    if (!tree.root) {
        throw MalformedActivity("activity " + tree.activity.activity_id +
                                ": no tree events");
    }
    return tree;
}

} // namespace provtrace
