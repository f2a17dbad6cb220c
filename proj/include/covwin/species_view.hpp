#pragma once

#include "covwin/event.hpp"
#include "covwin/species_stats.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace covwin {

enum class ViewKind { activity_ngram, directly_follows, trace_variant };

inline std::string_view to_string(ViewKind k) noexcept {
    switch (k) {
    case ViewKind::activity_ngram: return "activity_ngram";
    case ViewKind::directly_follows: return "directly_follows";
    case ViewKind::trace_variant: return "trace_variant";
    }
    return "unknown";
}

/// Accepts the canonical names plus the short aliases used on the command
/// line (act, df, tv).
inline ViewKind parse_view_kind(std::string_view s) {
    if (s == "activity_ngram" || s == "act" || s == "activity") return ViewKind::activity_ngram;
    if (s == "directly_follows" || s == "df") return ViewKind::directly_follows;
    if (s == "trace_variant" || s == "tv" || s == "variant") return ViewKind::trace_variant;
    throw std::invalid_argument("unknown species view '" + std::string(s) + "'");
}

struct ViewConfig {
    static constexpr Timestamp kDefaultCaseTimeout = 30 * 60 * 1000;

    ViewKind kind = ViewKind::activity_ngram;
    int ngram_order = 1;
    /// Stream-time inactivity after which a case counts as completed.
    Timestamp case_timeout = kDefaultCaseTimeout;

    void validate() const {
        if (ngram_order < 1 || ngram_order > 5)
            throw std::invalid_argument("ngram_order must be in [1,5]");
        if (case_timeout <= 0)
            throw std::invalid_argument("case_timeout must be positive");
    }

    std::string label() const {
        if (kind == ViewKind::activity_ngram) return "act" + std::to_string(ngram_order);
        return kind == ViewKind::directly_follows ? "df" : "tv";
    }
};

inline std::string join_tokens(const std::deque<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out.push_back(kSeparator);
        out += p;
    }
    return out;
}

// ----------------------------------------------------------------------------
// SpeciesView
//
// Maps events to species observations under one species definition, keeping
// the per-case context a stream needs (the last k activities, or the whole
// trace for variants). Cases live in a list ordered by last_seen; since event
// timestamps never decrease, touching a case moves it to the back and the
// front is always the longest idle case.
// ----------------------------------------------------------------------------
class SpeciesView {
public:
    struct CaseState {
        std::string case_id;
        std::deque<std::string> recent_activities;
        Timestamp last_seen = 0;
    };

    explicit SpeciesView(ViewConfig config = {}) : config_(config) {
        config_.validate();
        switch (config_.kind) {
        case ViewKind::activity_ngram: history_ = static_cast<std::size_t>(config_.ngram_order); break;
        case ViewKind::directly_follows: history_ = 2; break;
        case ViewKind::trace_variant: history_ = std::numeric_limits<std::size_t>::max(); break;
        }
    }

    const ViewConfig& config() const noexcept { return config_; }

    /// Species produced by one event. Appends to `out`.
    void extract(const Event& e, std::vector<SpeciesId>& out) {
        CaseState& cs = touch(e);
        auto& recent = cs.recent_activities;
        recent.push_back(e.activity);
        if (recent.size() > history_) recent.pop_front();

        switch (config_.kind) {
        case ViewKind::activity_ngram:
            if (config_.ngram_order == 1) {
                out.push_back(e.activity);
            } else if (recent.size() == history_) {
                out.push_back(join_tokens(recent));
            }
            break;
        case ViewKind::directly_follows:
            if (recent.size() == 2) out.push_back(recent[0] + kSeparator + recent[1]);
            break;
        case ViewKind::trace_variant:
            break;
        }
    }

    std::vector<SpeciesId> extract(const Event& e) {
        std::vector<SpeciesId> out;
        extract(e, out);
        return out;
    }

    /// Completes every case idle for longer than the case timeout at stream
    /// time `now`. Trace-variant views emit one variant token per completed
    /// case; other views only drop the state.
    void flush_cases(Timestamp now, std::vector<SpeciesId>& out) {
        while (!order_.empty() && now - order_.front().last_seen > config_.case_timeout) {
            complete_front(out);
        }
    }

    std::vector<SpeciesId> flush_cases(Timestamp now) {
        std::vector<SpeciesId> out;
        flush_cases(now, out);
        return out;
    }

    /// End of stream: completes all open cases, oldest first.
    void flush_all(std::vector<SpeciesId>& out) {
        while (!order_.empty()) complete_front(out);
    }

    std::vector<SpeciesId> flush_all() {
        std::vector<SpeciesId> out;
        flush_all(out);
        return out;
    }

    std::size_t open_cases() const noexcept { return order_.size(); }

    const CaseState* find_case(std::string_view case_id) const {
        auto it = index_.find(std::string(case_id));
        return it == index_.end() ? nullptr : &*it->second;
    }

private:
    using CaseList = std::list<CaseState>;

    CaseState& touch(const Event& e) {
        auto it = index_.find(e.case_id);
        if (it == index_.end()) {
            order_.push_back(CaseState{e.case_id, {}, e.timestamp});
            auto pos = std::prev(order_.end());
            index_.emplace(e.case_id, pos);
            return *pos;
        }
        order_.splice(order_.end(), order_, it->second);
        it->second->last_seen = e.timestamp;
        return *it->second;
    }

    void complete_front(std::vector<SpeciesId>& out) {
        CaseState& cs = order_.front();
        if (config_.kind == ViewKind::trace_variant && !cs.recent_activities.empty()) {
            out.push_back(join_tokens(cs.recent_activities));
        }
        index_.erase(cs.case_id);
        order_.pop_front();
    }

    ViewConfig config_;
    std::size_t history_ = 1;
    CaseList order_;
    std::unordered_map<std::string, CaseList::iterator> index_;
};

} // namespace covwin
