#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <string_view>

namespace provtrace {

// Pipeline stages tracked in the run report.
enum class Stage {
    LogRead,
    LogParse,
    GroupSort,
    TreeBuild,
    Filter,
    RuntimeExtract,
    ProvenanceExtract,
    Stitch,
    Aggregate,
    Compile,
    Upload,
    Finalize,
    kCount,
};

constexpr std::size_t kStageCount = static_cast<std::size_t>(Stage::kCount);

std::string_view stage_name(Stage s);

// Accumulates wall time per stage. Scoped timing via StageTimer.
class StageClock {
public:
    void add(Stage s, double ms) { ms_[static_cast<std::size_t>(s)] += ms; }
    double ms(Stage s) const { return ms_[static_cast<std::size_t>(s)]; }
    double total_ms() const {
        double t = 0;
        for (double v : ms_) t += v;
        return t;
    }

private:
    std::array<double, kStageCount> ms_{};
};

class StageTimer {
public:
    StageTimer(StageClock* clock, Stage stage)
        : clock_(clock), stage_(stage),
          start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() { stop(); }

    StageTimer(const StageTimer&) = delete;
    StageTimer& operator=(const StageTimer&) = delete;

    void stop() {
        if (!clock_) return;
        auto end = std::chrono::steady_clock::now();
        clock_->add(stage_,
                    std::chrono::duration<double, std::milli>(end - start_).count());
        clock_ = nullptr;
    }

private:
    StageClock* clock_;
    Stage stage_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace provtrace
