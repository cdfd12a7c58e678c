#include "provtrace/hooks.hpp"

#include "provtrace/errors.hpp"

namespace provtrace {

namespace {

struct PointSpec {
    HookPoint point;
    std::string_view state;
};

// The declared hook surface. Start/End exist for every (sub-)component;
// PreSend/PostSend where a component hands results onward; PerItem inside
// loops over items of concern.
const PointSpec kPoints[] = {
    {{HookStage::Pipeline, HookKind::Start}, "no state"},
    {{HookStage::Pipeline, HookKind::End}, "graph (read)"},
    {{HookStage::Collector, HookKind::Start}, "no state"},
    {{HookStage::Collector, HookKind::End}, "batch (read/write)"},
    {{HookStage::Collector, HookKind::PreSend}, "batch (read/write)"},
    {{HookStage::Collector, HookKind::PostSend}, "batch (read)"},
    {{HookStage::CollectorRead, HookKind::Start}, "no state"},
    {{HookStage::CollectorRead, HookKind::End}, "no state"},
    {{HookStage::CollectorParse, HookKind::Start}, "no state"},
    {{HookStage::CollectorParse, HookKind::End}, "no state"},
    {{HookStage::CollectorParse, HookKind::PerItem}, "event (read)"},
    {{HookStage::CollectorSort, HookKind::Start}, "no state"},
    {{HookStage::CollectorSort, HookKind::End}, "no state"},
    {{HookStage::CollectorTreeBuild, HookKind::Start}, "no state"},
    {{HookStage::CollectorTreeBuild, HookKind::End}, "no state"},
    {{HookStage::CollectorTreeBuild, HookKind::PerItem}, "tree (read/write, droppable)"},
    {{HookStage::RuntimeExtractor, HookKind::Start}, "no state"},
    {{HookStage::RuntimeExtractor, HookKind::End}, "no state"},
    {{HookStage::RuntimeExtractor, HookKind::PerItem}, "tree (read)"},
    {{HookStage::RuntimeExtractor, HookKind::PreSend}, "no state"},
    {{HookStage::RuntimeExtractor, HookKind::PostSend}, "no state"},
    {{HookStage::ProvenanceExtractor, HookKind::Start}, "no state"},
    {{HookStage::ProvenanceExtractor, HookKind::End}, "no state"},
    {{HookStage::ProvenanceExtractor, HookKind::PerItem}, "tree (read)"},
    {{HookStage::ProvenanceExtractor, HookKind::PreSend}, "no state"},
    {{HookStage::ProvenanceExtractor, HookKind::PostSend}, "no state"},
    {{HookStage::Stitcher, HookKind::Start}, "no state"},
    {{HookStage::Stitcher, HookKind::End}, "graph (read/write)"},
    {{HookStage::Stitcher, HookKind::PerItem}, "tree (read)"},
    {{HookStage::Aggregator, HookKind::Start}, "no state"},
    {{HookStage::Aggregator, HookKind::End}, "graph (read/write)"},
    {{HookStage::Uploader, HookKind::Start}, "graph (read)"},
    {{HookStage::Uploader, HookKind::End}, "no state"},
    {{HookStage::Uploader, HookKind::PreSend}, "no state"},
    {{HookStage::Uploader, HookKind::PostSend}, "no state"},
};

} // namespace

bool is_known_point(HookPoint point) {
    for (const auto& spec : kPoints) {
        if (spec.point == point) return true;
    }
    return false;
}

std::string_view hook_point_state(HookPoint point) {
    for (const auto& spec : kPoints) {
        if (spec.point == point) return spec.state;
    }
    return {};
}

std::size_t HookRegistry::register_hook(HookPoint point, HookFn fn) {
    if (!is_known_point(point)) {
        throw UnknownPoint("hook point is not part of the pipeline");
    }
    const std::size_t id = next_id_++;
    hooks_[point].emplace_back(id, std::move(fn));
    return id;
}

void HookRegistry::invoke(HookPoint point, HookState& state) const {
    auto it = hooks_.find(point);
    if (it == hooks_.end()) return;
    for (const auto& [id, fn] : it->second) fn(state);
}

bool HookRegistry::has(HookPoint point) const {
    auto it = hooks_.find(point);
    return it != hooks_.end() && !it->second.empty();
}

} // namespace provtrace
