#pragma once

#include "provtrace/event.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace provtrace {

// A causally related group of events sharing one activity id, ordered by
// (ts, seq).
struct Activity {
    std::string activity_id;
    std::vector<QueryEvent> events;

    std::int64_t trigger_time() const {
        return events.empty() ? 0 : events.front().ts;
    }
};

// Rolling fingerprint over the (ts, seq) list; identifies one concrete
// event slice of an activity in the checkpoint.
std::uint64_t activity_fingerprint(const std::vector<QueryEvent>& events);

// True for events that take part in dependency-tree construction.
// Plan-payload carriers are byte ballast only.
inline bool is_tree_event(const QueryEvent& e) {
    return !e.plan_payload.has_value();
}

// How downstream stages treat a node. Filters may exclude a query from
// lineage analysis while keeping its runtime metadata.
enum class NodeRoute { Full, RuntimeOnly };

// One query run: a started event, its matching completed event, and the
// runs it spawned. Children's [started, completed] intervals nest
// strictly inside the parent's. Event fields are indices into the owning
// tree's activity.
struct QueryTreeNode {
    std::string node_id; // path of child indices from the root, e.g. "0.2.1"
    std::size_t started_idx{};
    std::optional<std::size_t> completed_idx;
    QueryTreeNode* parent{nullptr};
    std::vector<std::unique_ptr<QueryTreeNode>> children;

    NodeRoute route{NodeRoute::Full};
    // Set by loop compression: total iterations this node's cycle ran.
    std::uint32_t compressed_iterations{0};
};

// Per-activity tree of query-run dependencies. Owns the activity's
// events; exactly one root, every other node has a parent.
struct QueryTree {
    Activity activity;
    std::unique_ptr<QueryTreeNode> root;

    const QueryEvent& started(const QueryTreeNode& n) const {
        return activity.events[n.started_idx];
    }
    const QueryEvent& completed(const QueryTreeNode& n) const {
        return activity.events[*n.completed_idx];
    }

    std::size_t node_count() const;
};

struct TreeBuildOptions {
    // When false (default), every started event opens a subtree: the next
    // started event becomes its child until it completes. This matches
    // the interval nesting of well-formed logs and also covers statements
    // that unexpectedly spawn children. When true, only batches and
    // EXECUTE/EXEC statements open subtrees.
    bool strict_subtree = false;
};

// Builds the dependency tree from an activity's ordered events with one
// stack pass: started events push nodes, completed events pop and must
// match the top of the stack. O(n) time in event count, O(m) live stack
// entries with m = unmatched started events.
//
// Throws MalformedActivity when the first event is a completed one, when
// a completed event's class or activity mismatch the popped started
// event, or when events remain on the stack at the end.
QueryTree build_query_tree(Activity activity, const TreeBuildOptions& opts = {});

// Pre-order traversal.
template <typename Fn>
void for_each_node(QueryTreeNode& node, Fn&& fn) {
    fn(node);
    for (auto& child : node.children) for_each_node(*child, fn);
}

template <typename Fn>
void for_each_node(const QueryTreeNode& node, Fn&& fn) {
    fn(node);
    for (const auto& child : node.children) for_each_node(*child, fn);
}

} // namespace provtrace
