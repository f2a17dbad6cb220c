#pragma once

#include "covwin/event.hpp"
#include "covwin/species_stats.hpp"
#include "covwin/species_view.hpp"
#include "covwin/threshold.hpp"
#include "covwin/window_record.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace covwin {

struct AdaptiveConfig {
    double initial_threshold = 0.9;
    double initial_smoothing = 0.2;
    double decay_rate = 0.1;
    double min_threshold = 0.5;
    double stagnation_delta = 0.01;
    std::size_t stagnation_window = 5;
    std::size_t min_window_size = 5;

    ThresholdParams threshold_params() const {
        return {decay_rate, min_threshold, stagnation_delta, stagnation_window};
    }

    void validate() const {
        threshold_params().validate();
        if (min_window_size < 1) throw std::invalid_argument("min_window_size must be >= 1");
    }
};

// ----------------------------------------------------------------------------
// AdaptiveWindow
//
// Coverage-driven tumbling window. Every event is buffered and its species
// are counted; the coverage after the event is appended to the history of
// the open window and drives the threshold heuristic. The window closes as
// soon as coverage reaches the current threshold and the buffer holds at
// least min_window_size events. Closing clears buffer, counts and history;
// threshold and smoothing carry over to the next window.
//
// For trace-variant views, cases idle past the view's timeout are completed
// before each event and their variants count towards the open window.
// ----------------------------------------------------------------------------
class AdaptiveWindow {
public:
    AdaptiveWindow(AdaptiveConfig config, ViewConfig view)
        : config_(validated(config)),
          view_(view),
          controller_({config.initial_threshold, config.initial_smoothing}, config.threshold_params()) {}

    std::optional<WindowRecord> process(const Event& e) {
        scratch_.clear();
        view_.flush_cases(e.timestamp, scratch_);
        view_.extract(e, scratch_);
        for (const auto& s : scratch_) stats_.observe(s);
        buffer_.push_back(e);

        const double cov = coverage(stats_);
        controller_.push(cov);
        if (cov >= controller_.state().threshold && buffer_.size() >= config_.min_window_size) {
            return close(false);
        }
        return std::nullopt;
    }

    /// Completes cases idle at stream time `now`, then force-closes the open
    /// window if it holds any events.
    std::optional<WindowRecord> flush(Timestamp now) {
        scratch_.clear();
        view_.flush_cases(now, scratch_);
        return flush_with(scratch_);
    }

    /// End of stream: completes every open case first.
    std::optional<WindowRecord> flush() {
        scratch_.clear();
        view_.flush_all(scratch_);
        return flush_with(scratch_);
    }

    const AdaptiveConfig& config() const noexcept { return config_; }
    const ThresholdState& threshold() const noexcept { return controller_.state(); }
    const std::vector<double>& history() const noexcept { return controller_.history(); }
    const AbundanceStats& stats() const noexcept { return stats_; }
    const std::vector<Event>& buffer() const noexcept { return buffer_; }
    const SpeciesView& view() const noexcept { return view_; }
    std::uint64_t windows_closed() const noexcept { return closed_; }

private:
    static const AdaptiveConfig& validated(const AdaptiveConfig& c) {
        c.validate();
        return c;
    }

    std::optional<WindowRecord> flush_with(const std::vector<SpeciesId>& species) {
        if (buffer_.empty()) return std::nullopt;
        for (const auto& s : species) stats_.observe(s);
        return close(true);
    }

    WindowRecord close(bool forced) {
        auto rec = make_record(closed_++, std::exchange(buffer_, {}), estimates(stats_),
                               controller_.state().threshold, forced);
        stats_.reset();
        controller_.clear_history();
        return rec;
    }

    AdaptiveConfig config_;
    SpeciesView view_;
    ThresholdController controller_;
    AbundanceStats stats_;
    std::vector<Event> buffer_;
    std::vector<SpeciesId> scratch_;
    std::uint64_t closed_ = 0;
};

} // namespace covwin
