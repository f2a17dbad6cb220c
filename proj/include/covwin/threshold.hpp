#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace covwin {

/// Constants of the dynamic threshold heuristic.
struct ThresholdParams {
    static constexpr double kMaxThreshold = 0.99;
    static constexpr double kMinSmoothing = 0.01;
    static constexpr double kMaxSmoothing = 0.99;

    double decay_rate = 0.1;
    double min_threshold = 0.5;
    double stagnation_delta = 0.01;
    std::size_t stagnation_window = 5;

    void validate() const {
        if (!(decay_rate > 0.0)) throw std::invalid_argument("decay_rate must be > 0");
        if (!(min_threshold >= 0.0 && min_threshold <= kMaxThreshold))
            throw std::invalid_argument("min_threshold must be in [0, 0.99]");
        if (!(stagnation_delta > 0.0)) throw std::invalid_argument("stagnation_delta must be > 0");
        if (stagnation_window < 2) throw std::invalid_argument("stagnation_window must be >= 2");
    }
};

/// Mutable part of the heuristic: the closing threshold and the smoothing
/// factor. Both persist across windows.
struct ThresholdState {
    double threshold = 0.9;
    double smoothing = 0.2;

    friend bool operator==(const ThresholdState&, const ThresholdState&) = default;
};

namespace detail {

inline ThresholdState blend(ThresholdState s, double elbow_value, bool stagnant,
                            const ThresholdParams& p) {
    double base = s.threshold;
    if (stagnant) {
        s.smoothing = std::min(1.2 * s.smoothing, ThresholdParams::kMaxSmoothing);
        base = std::max(s.threshold - p.decay_rate, p.min_threshold);
    } else {
        s.smoothing = std::max(0.8 * s.smoothing, ThresholdParams::kMinSmoothing);
    }
    const double next = s.smoothing * elbow_value + (1.0 - s.smoothing) * base;
    // The blend can undershoot the floor when the elbow sits below it.
    s.threshold = std::clamp(next, p.min_threshold, ThresholdParams::kMaxThreshold);
    return s;
}

} // namespace detail

/// One step of the elbow-based threshold heuristic over a full coverage
/// history C_0..C_{n-1} (n >= 3).
///
/// The elbow is the index maximising the second difference
/// C_{i-1} - 2 C_i + C_{i+1}, earliest index on ties; its successor's
/// coverage is the target value. Coverage is stagnant when the last w values
/// move by less than delta between neighbours. Stagnation raises the
/// smoothing factor and decays the threshold towards the floor, otherwise
/// smoothing decreases. The result is clamped to [min_threshold, 0.99].
///
/// O(n). The adaptive window uses ThresholdController, which yields the same
/// values incrementally.
inline ThresholdState update_threshold(std::span<const double> history, ThresholdState state,
                                       const ThresholdParams& params) {
    const std::size_t n = history.size();
    if (n < 3) throw std::logic_error("update_threshold: contract violation, history needs >= 3 values");

    std::size_t best_i = 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double r2 = history[i - 1] - 2.0 * history[i] + history[i + 1];
        if (r2 > best) {
            best = r2;
            best_i = i;
        }
    }
    const double elbow_value = history[best_i + 1];

    const std::size_t w = params.stagnation_window;
    bool stagnant = n >= w;
    for (std::size_t k = n - std::min(n, w); stagnant && k + 1 < n; ++k) {
        if (!(std::abs(history[k] - history[k + 1]) < params.stagnation_delta)) stagnant = false;
    }
    return detail::blend(state, elbow_value, stagnant, params);
}

// ----------------------------------------------------------------------------
// ThresholdController
//
// Owns the coverage history of the open window and applies the heuristic
// after every appended value once three values exist. A new value only adds
// one second difference, so the running argmax (strictly greater replaces,
// keeping the earliest index) and the length of the trailing run of small
// steps are enough: each step is O(1).
// ----------------------------------------------------------------------------
class ThresholdController {
public:
    ThresholdController(ThresholdState initial, ThresholdParams params)
        : state_(initial), params_(params) {
        params_.validate();
        if (!(state_.smoothing >= ThresholdParams::kMinSmoothing &&
              state_.smoothing <= ThresholdParams::kMaxSmoothing))
            throw std::invalid_argument("initial smoothing must be in [0.01, 0.99]");
        if (!(state_.threshold >= params_.min_threshold &&
              state_.threshold <= ThresholdParams::kMaxThreshold))
            throw std::invalid_argument("initial threshold must be in [min_threshold, 0.99]");
    }

    /// Appends a coverage value; returns true when the threshold was updated.
    bool push(double coverage) {
        const std::size_t n = history_.size();
        if (n >= 1) {
            if (std::abs(history_[n - 1] - coverage) < params_.stagnation_delta) {
                ++small_steps_;
            } else {
                small_steps_ = 0;
            }
        }
        history_.push_back(coverage);
        if (n + 1 < 3) return false;

        const double r2 = history_[n - 2] - 2.0 * history_[n - 1] + history_[n];
        if (r2 > best_r2_) {
            best_r2_ = r2;
            elbow_value_ = history_[n];
        }
        const bool stagnant = history_.size() >= params_.stagnation_window &&
                              small_steps_ + 1 >= params_.stagnation_window;
        state_ = detail::blend(state_, elbow_value_, stagnant, params_);
        return true;
    }

    /// Window closed: drop the history, keep threshold and smoothing.
    void clear_history() noexcept {
        history_.clear();
        small_steps_ = 0;
        best_r2_ = -std::numeric_limits<double>::infinity();
        elbow_value_ = 0.0;
    }

    const ThresholdState& state() const noexcept { return state_; }
    const ThresholdParams& params() const noexcept { return params_; }
    const std::vector<double>& history() const noexcept { return history_; }

private:
    ThresholdState state_;
    ThresholdParams params_;
    std::vector<double> history_;
    std::size_t small_steps_ = 0;
    double best_r2_ = -std::numeric_limits<double>::infinity();
    double elbow_value_ = 0.0;
};

} // namespace covwin
