#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace covwin {

/// Milliseconds since the Unix epoch.
using Timestamp = std::int64_t;

/// Joins activity names into composite species tokens (n-grams, trace
/// variants, directly-follows pairs). Rejected inside activity names at
/// ingestion so that joined tokens cannot collide.
inline constexpr char kSeparator = '|';

/// One stream element: an activity executed for a case at a point in time.
struct Event {
    std::string case_id;
    std::string activity;
    Timestamp timestamp = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

inline bool contains_separator(std::string_view s) noexcept {
    return s.find(kSeparator) != std::string_view::npos;
}

} // namespace covwin
