#pragma once

#include "covwin/event.hpp"
#include "covwin/species_stats.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace covwin {

/// A closed window as emitted to sinks.
struct WindowRecord {
    std::uint64_t index = 0;
    std::vector<Event> events;
    std::size_t size = 0;
    Timestamp first_ts = 0;
    Timestamp last_ts = 0;
    double final_coverage = 0.0;
    double final_completeness = 0.0;
    double chao1 = 0.0;
    double threshold_at_close = 0.0;
    /// Closed by flush rather than by the strategy's closing rule.
    bool force_closed = false;

    friend bool operator==(const WindowRecord&, const WindowRecord&) = default;
};

inline WindowRecord make_record(std::uint64_t index, std::vector<Event> events, const Estimates& est,
                                double threshold, bool forced) {
    WindowRecord r;
    r.index = index;
    r.size = events.size();
    if (!events.empty()) {
        r.first_ts = events.front().timestamp;
        r.last_ts = events.back().timestamp;
    }
    r.events = std::move(events);
    r.final_coverage = est.coverage;
    r.final_completeness = est.completeness;
    r.chao1 = est.chao1;
    r.threshold_at_close = threshold;
    r.force_closed = forced;
    return r;
}

} // namespace covwin
