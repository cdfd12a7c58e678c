#pragma once

#include "provtrace/event.hpp"
#include "provtrace/graph.hpp"
#include "provtrace/query_tree.hpp"

#include <functional>
#include <map>
#include <vector>

namespace provtrace {

// Components and sub-stages that expose hook points.
enum class HookStage {
    Pipeline,
    Collector,
    CollectorRead,
    CollectorParse,
    CollectorSort,
    CollectorTreeBuild,
    RuntimeExtractor,
    ProvenanceExtractor,
    Stitcher,
    Aggregator,
    Uploader,
};

// Point kinds: start/end of a (sub-)component, right before/after a
// component sends its results onward, and per item inside its loops.
enum class HookKind { Start, End, PreSend, PostSend, PerItem };

struct HookPoint {
    HookStage stage;
    HookKind kind;

    auto operator<=>(const HookPoint&) const = default;
};

// State a hook can read or write; which pointers are set depends on the
// point (documented in hook_point_state). Setting `drop` at a PerItem
// point excludes the item from the rest of the pipeline.
struct HookState {
    const QueryEvent* event{nullptr};
    QueryTree* tree{nullptr};
    std::vector<QueryTree>* batch{nullptr};
    ProvenanceGraph* graph{nullptr};
    bool drop{false};
};

using HookFn = std::function<void(HookState&)>;

bool is_known_point(HookPoint point);

// Short description of the state available at a point; empty for unknown
// points.
std::string_view hook_point_state(HookPoint point);

// Registry of injected functions. Immutable once the pipeline starts;
// functions at one point run in registration order.
class HookRegistry {
public:
    // Returns a registration id. Throws UnknownPoint for a point that is
    // not part of the pipeline.
    std::size_t register_hook(HookPoint point, HookFn fn);

    void invoke(HookPoint point, HookState& state) const;
    bool has(HookPoint point) const;

private:
    std::map<HookPoint, std::vector<std::pair<std::size_t, HookFn>>> hooks_;
    std::size_t next_id_{1};
};

} // namespace provtrace
