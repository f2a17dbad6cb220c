#pragma once

#include "covwin/event.hpp"
#include "covwin/species_stats.hpp"
#include "covwin/window_record.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace covwin {

enum class BaselineKind { count_tumbling, time_tumbling, landmark };

inline BaselineKind parse_baseline_kind(std::string_view s) {
    if (s == "count" || s == "count_tumbling") return BaselineKind::count_tumbling;
    if (s == "time" || s == "time_tumbling") return BaselineKind::time_tumbling;
    if (s == "landmark") return BaselineKind::landmark;
    throw std::invalid_argument("unknown baseline strategy '" + std::string(s) + "'");
}

struct BaselineConfig {
    BaselineKind kind = BaselineKind::count_tumbling;
    std::size_t count = 20;
    Timestamp duration = 60'000;
    std::string landmark_activity;

    void validate() const {
        switch (kind) {
        case BaselineKind::count_tumbling:
            if (count < 1) throw std::invalid_argument("count must be >= 1");
            break;
        case BaselineKind::time_tumbling:
            if (duration <= 0) throw std::invalid_argument("duration must be > 0");
            break;
        case BaselineKind::landmark:
            if (landmark_activity.empty()) throw std::invalid_argument("landmark activity must be non-empty");
            break;
        }
    }

    std::string label() const {
        switch (kind) {
        case BaselineKind::count_tumbling: return "count" + std::to_string(count);
        case BaselineKind::time_tumbling: return "time" + std::to_string(duration);
        case BaselineKind::landmark: return "landmark";
        }
        return "baseline";
    }
};

/// Fixed-rule tumbling windows used as comparison baselines. Records carry
/// activity-level estimates of their content; threshold_at_close is 0.
class BaselineWindow {
public:
    explicit BaselineWindow(BaselineConfig config) : config_(std::move(config)) { config_.validate(); }

    std::optional<WindowRecord> process(const Event& e) {
        std::optional<WindowRecord> out;
        switch (config_.kind) {
        case BaselineKind::count_tumbling:
            push(e);
            if (buffer_.size() >= config_.count) out = close(false);
            break;
        case BaselineKind::time_tumbling:
            if (!buffer_.empty() && e.timestamp - buffer_.front().timestamp >= config_.duration) out = close(false);
            push(e);
            break;
        case BaselineKind::landmark:
            // The landmark event opens the next window.
            if (!buffer_.empty() && e.activity == config_.landmark_activity) out = close(false);
            push(e);
            break;
        }
        return out;
    }

    std::optional<WindowRecord> flush() {
        if (buffer_.empty()) return std::nullopt;
        return close(true);
    }

    const BaselineConfig& config() const noexcept { return config_; }
    const std::vector<Event>& buffer() const noexcept { return buffer_; }

private:
    void push(const Event& e) {
        buffer_.push_back(e);
        stats_.observe(e.activity);
    }

    WindowRecord close(bool forced) {
        auto rec = make_record(closed_++, std::exchange(buffer_, {}), estimates(stats_), 0.0, forced);
        stats_.reset();
        return rec;
    }

    BaselineConfig config_;
    std::vector<Event> buffer_;
    AbundanceStats stats_;
    std::uint64_t closed_ = 0;
};

} // namespace covwin
