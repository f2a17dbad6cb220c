#pragma once

#include "covwin/adaptive_window.hpp"
#include "covwin/driftgen.hpp"
#include "covwin/pipeline.hpp"
#include "covwin/replay.hpp"
#include "covwin/wire_format.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace covwin::bench {

// ----------------------------------------------------------------------------
// Small statistics helpers
// ----------------------------------------------------------------------------

template <class Range>
double mean(const Range& xs) {
    if (std::empty(xs)) return 0.0;
    double s = 0.0;
    for (auto x : xs) s += static_cast<double>(x);
    return s / static_cast<double>(std::size(xs));
}

/// Population standard deviation.
template <class Range>
double stddev(const Range& xs) {
    if (std::empty(xs)) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (auto x : xs) ss += (static_cast<double>(x) - m) * (static_cast<double>(x) - m);
    return std::sqrt(ss / static_cast<double>(std::size(xs)));
}

/// Linear-interpolated quantile of an unsorted sample, q in [0,1].
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LinearFit fit_linear(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_linear needs two equally long series");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r2 = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

// ----------------------------------------------------------------------------
// Running strategies
// ----------------------------------------------------------------------------

/// Feeds all events and flushes at the end; the residue is the last,
/// force-closed record.
inline std::vector<WindowRecord> run_pipeline(std::span<const Event> events, Pipeline& pipeline) {
    std::vector<WindowRecord> out;
    for (const auto& e : events)
        if (auto r = pipeline.process(e)) out.push_back(std::move(*r));
    if (auto r = pipeline.flush()) out.push_back(std::move(*r));
    return out;
}

inline std::vector<std::size_t> closed_sizes(const std::vector<WindowRecord>& records) {
    std::vector<std::size_t> out;
    for (const auto& r : records)
        if (!r.force_closed) out.push_back(r.size);
    return out;
}

// ----------------------------------------------------------------------------
// Drift adaptation
// ----------------------------------------------------------------------------

struct WindowSizeSeries {
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> drift_markers;
};

struct DriftAdaptationReport {
    double mean_relative_change = 0.0;
    double std_relative_change = 0.0;
    double coefficient_of_variation = 0.0;
    double pre_mean = 0.0;
    double during_mean = 0.0;
    double post_mean = 0.0;
};

/// Window-size statistics around a drift. The analysed span is the closed
/// index range [drift_index - before, drift_index + after]: `before` windows
/// ahead of the drift window, the drift window and `after` windows
/// following it. Relative changes |s[j+1] - s[j]| / s[j] run over
/// consecutive windows of the span; CV is the population std over mean of
/// the span's sizes. "During" is the first half of the after-span (which
/// starts at the drift window), "post" the rest.
inline DriftAdaptationReport drift_adaptation_stats(std::span<const std::size_t> sizes, std::size_t drift_index,
                                                    std::size_t before = 10, std::size_t after = 20) {
    if (after < 1 || drift_index < before || drift_index + after >= sizes.size())
        throw std::invalid_argument("drift_adaptation_stats: insufficient windows around drift index " +
                                    std::to_string(drift_index) + " (have " + std::to_string(sizes.size()) + ")");
    const auto span = sizes.subspan(drift_index - before, before + after + 1);
    for (auto s : span)
        if (s == 0) throw std::invalid_argument("drift_adaptation_stats: window sizes must be >= 1");

    std::vector<double> rel;
    for (std::size_t j = 0; j + 1 < span.size(); ++j)
        rel.push_back(std::abs(static_cast<double>(span[j + 1]) - static_cast<double>(span[j])) /
                      static_cast<double>(span[j]));

    DriftAdaptationReport r;
    r.mean_relative_change = mean(rel);
    r.std_relative_change = stddev(rel);
    r.coefficient_of_variation = stddev(span) / mean(span);
    r.pre_mean = mean(span.first(before));
    const std::size_t half = std::max<std::size_t>(1, (after + 1) / 2);
    r.during_mean = mean(span.subspan(before, half));
    r.post_mean = mean(span.subspan(before + half));
    return r;
}

/// Index of the first record holding an event of a case with index >=
/// `case_idx` (case ids as produced by the generator). npos when none.
inline std::size_t window_of_case(const std::vector<WindowRecord>& records, std::size_t case_idx) {
    for (std::size_t i = 0; i < records.size(); ++i)
        for (const auto& e : records[i].events) {
            const auto k = driftgen::case_index(e.case_id);
            if (k != std::string::npos && k >= case_idx) return i;
        }
    return std::string::npos;
}

inline WindowSizeSeries size_series(const std::vector<WindowRecord>& records,
                                    const std::vector<std::size_t>& drift_cases) {
    WindowSizeSeries s;
    for (const auto& r : records) s.sizes.push_back(r.size);
    for (auto c : drift_cases)
        if (auto w = window_of_case(records, c); w != std::string::npos) s.drift_markers.push_back(w);
    return s;
}

// ----------------------------------------------------------------------------
// Directly-follows accuracy (a proxy for model conformance)
// ----------------------------------------------------------------------------

using Dfg = std::set<std::pair<std::string, std::string>>;

/// Pairs (a, b) where b directly follows a within one case, in stream order.
inline Dfg build_dfg(std::span<const Event> events) {
    Dfg out;
    std::unordered_map<std::string, const std::string*> last;
    for (const auto& e : events) {
        auto [it, fresh] = last.try_emplace(e.case_id, &e.activity);
        if (!fresh) {
            out.emplace(*it->second, e.activity);
            it->second = &e.activity;
        }
    }
    return out;
}

struct DfgAccuracy {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline DfgAccuracy dfg_accuracy(const Dfg& window, const Dfg& reference) {
    DfgAccuracy a;
    std::size_t common = 0;
    for (const auto& p : window) common += reference.count(p);
    if (!window.empty()) a.precision = static_cast<double>(common) / static_cast<double>(window.size());
    if (!reference.empty()) a.recall = static_cast<double>(common) / static_cast<double>(reference.size());
    if (a.precision + a.recall > 0.0) a.f1 = 2.0 * a.precision * a.recall / (a.precision + a.recall);
    return a;
}

inline DfgAccuracy dfg_accuracy(std::span<const Event> window, std::span<const Event> reference_events) {
    if (reference_events.empty()) throw std::invalid_argument("dfg_accuracy: empty reference");
    return dfg_accuracy(build_dfg(window), build_dfg(reference_events));
}

/// Reference DFG for a window of a generated log: the union of the DFGs of
/// the pools active for the cases it touches.
inline Dfg generated_reference(const WindowRecord& w, const driftgen::DriftSpec& spec,
                               const driftgen::Annotations& ann) {
    std::set<std::size_t> pools;
    for (const auto& e : w.events) {
        const auto k = driftgen::case_index(e.case_id);
        if (k < ann.pool_per_case.size()) pools.insert(ann.pool_per_case[k]);
    }
    Dfg ref;
    for (auto p : pools) ref.merge(driftgen::pool_dfg(spec.pools.at(p)));
    return ref;
}

struct StrategySummary {
    std::string label;
    std::size_t windows = 0;
    double mean_size = 0.0;
    std::size_t min_size = 0;
    std::size_t max_size = 0;
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    double mean_f1 = 0.0;
};

/// Reference DFG for a window under evaluation.
using ReferenceFn = std::function<Dfg(const WindowRecord&)>;

/// Mean DFG accuracy and size statistics over all windows of a strategy.
inline StrategySummary score_strategy(const std::string& label, const std::vector<WindowRecord>& records,
                                      const ReferenceFn& reference) {
    StrategySummary s;
    s.label = label;
    s.windows = records.size();
    std::vector<double> p, r, f, sizes;
    for (const auto& w : records) {
        const auto acc = dfg_accuracy(build_dfg(w.events), reference(w));
        p.push_back(acc.precision);
        r.push_back(acc.recall);
        f.push_back(acc.f1);
        sizes.push_back(static_cast<double>(w.size));
    }
    s.mean_precision = mean(p);
    s.mean_recall = mean(r);
    s.mean_f1 = mean(f);
    s.mean_size = mean(sizes);
    if (!records.empty()) {
        auto [lo, hi] = std::minmax_element(records.begin(), records.end(),
                                            [](const auto& a, const auto& b) { return a.size < b.size; });
        s.min_size = lo->size;
        s.max_size = hi->size;
    }
    return s;
}

inline StrategySummary score_strategy(const std::string& label, const std::vector<WindowRecord>& records,
                                      const driftgen::DriftSpec& spec, const driftgen::Annotations& ann) {
    return score_strategy(label, records, [&](const WindowRecord& w) { return generated_reference(w, spec, ann); });
}

inline MetricsTable comparison_table(const std::vector<StrategySummary>& rows) {
    MetricsTable t;
    t.header = {"strategy", "windows", "mean_size", "min_size", "max_size", "mean_precision", "mean_recall", "mean_f1"};
    for (const auto& s : rows)
        t.rows.push_back({s.label, std::to_string(s.windows), format_double(s.mean_size), std::to_string(s.min_size),
                          std::to_string(s.max_size), format_double(s.mean_precision), format_double(s.mean_recall),
                          format_double(s.mean_f1)});
    return t;
}

struct ComparisonOptions {
    AdaptiveConfig adaptive;
    std::vector<ViewConfig> views = default_views();
    std::size_t count = 20;
    std::string landmark_activity = "A";

    /// Activity 1-gram, directly-follows and trace variants. Generated logs
    /// have sub-second gaps, so variants complete after 500 ms idle.
    static std::vector<ViewConfig> default_views() {
        return {ViewConfig{ViewKind::activity_ngram, 1, ViewConfig::kDefaultCaseTimeout},
                ViewConfig{ViewKind::directly_follows, 1, ViewConfig::kDefaultCaseTimeout},
                ViewConfig{ViewKind::trace_variant, 1, 500}};
    }
};

/// Runs the adaptive window under every configured view, count-tumbling
/// and landmark windows over the same events. Adaptive rows come first, in
/// view order.
inline std::vector<StrategySummary> compare_strategies(std::span<const Event> events, const ReferenceFn& reference,
                                                       const ComparisonOptions& opts = {}) {
    std::vector<StrategySummary> rows;
    auto score = [&](Pipeline p) {
        const auto label = p.label();
        rows.push_back(score_strategy(label, run_pipeline(events, p), reference));
    };
    for (const auto& v : opts.views) score(Pipeline(opts.adaptive, v));
    score(Pipeline(BaselineConfig{BaselineKind::count_tumbling, opts.count, 1, {}}));
    score(Pipeline(BaselineConfig{BaselineKind::landmark, 1, 1, opts.landmark_activity}));
    return rows;
}

/// Generated logs: each window is scored against the pools of its cases.
inline std::vector<StrategySummary> compare_strategies(const driftgen::GeneratedLog& log,
                                                       const driftgen::DriftSpec& spec,
                                                       const ComparisonOptions& opts = {}) {
    return compare_strategies(
        log.events, [&](const WindowRecord& w) { return generated_reference(w, spec, log.annotations); }, opts);
}

/// Other logs: each window is scored against the DFG of the whole log.
inline std::vector<StrategySummary> compare_strategies(std::span<const Event> events,
                                                       const ComparisonOptions& opts = {}) {
    const Dfg whole = build_dfg(events);
    return compare_strategies(events, [&](const WindowRecord&) { return whole; }, opts);
}

/// The adaptive row with the highest mean F1 (first on ties); null if none.
inline const StrategySummary* best_adaptive(const std::vector<StrategySummary>& rows) {
    const StrategySummary* best = nullptr;
    for (const auto& r : rows)
        if (r.label.rfind("adaptive-", 0) == 0 && (!best || r.mean_f1 > best->mean_f1)) best = &r;
    return best;
}

inline const StrategySummary* find_row(const std::vector<StrategySummary>& rows, std::string_view label) {
    for (const auto& r : rows)
        if (r.label == label) return &r;
    return nullptr;
}

// ----------------------------------------------------------------------------
// Drift reports for generated logs
// ----------------------------------------------------------------------------

struct DriftReportRow {
    std::size_t drift_case = 0;
    std::size_t drift_window = 0;
    std::size_t before = 0;
    std::size_t after = 0;
    DriftAdaptationReport report;
};

/// One report per ground-truth drift of a generated log whose span fits in
/// the closed windows. Gradual drifts yield a single report anchored at the
/// ramp start, with an after-span of twice the ramp length so that "during"
/// covers the ramp windows. Drifts without enough surrounding windows are
/// skipped.
inline std::vector<DriftReportRow> drift_reports(const std::vector<WindowRecord>& records, driftgen::DriftKind kind,
                                                 const std::vector<std::size_t>& drift_cases,
                                                 std::size_t before = 10, std::size_t after = 20) {
    std::vector<WindowRecord> closed;
    for (const auto& r : records)
        if (!r.force_closed) closed.push_back(r);
    const auto sizes = closed_sizes(records);
    const auto series = size_series(closed, drift_cases);

    std::vector<DriftReportRow> out;
    auto attempt = [&](std::size_t drift_case, std::size_t window, std::size_t a) {
        if (window < before || window + a >= sizes.size()) return;
        out.push_back({drift_case, window, before, a, drift_adaptation_stats(sizes, window, before, a)});
    };
    if (kind == driftgen::DriftKind::gradual) {
        if (drift_cases.size() == 2 && series.drift_markers.size() == 2) {
            const std::size_t ramp = std::max<std::size_t>(1, series.drift_markers[1] - series.drift_markers[0]);
            attempt(drift_cases[0], series.drift_markers[0], 2 * ramp);
        }
        return out;
    }
    for (std::size_t i = 0; i < series.drift_markers.size() && i < drift_cases.size(); ++i)
        attempt(drift_cases[i], series.drift_markers[i], after);
    return out;
}

// ----------------------------------------------------------------------------
// Latency and throughput
// ----------------------------------------------------------------------------

struct LatencyRow {
    std::size_t n = 0;
    double median_us = 0.0;
    double p95_us = 0.0;
};

struct LatencyOptions {
    std::size_t trials = 200;
    std::size_t species = 20;
    std::uint64_t seed = 42;
    AdaptiveConfig adaptive;
    ViewConfig view;
};

/// Wall time from the first event of a window to the emission of its
/// record, for windows of exactly n events. Closing is held off until the
/// n-th event (min_window_size = n) and a flush emits the record if the
/// threshold was not reached by then.
inline std::vector<LatencyRow> measure_latency(std::span<const std::size_t> sizes, const LatencyOptions& opts = {}) {
    using clock = std::chrono::steady_clock;
    std::mt19937_64 rng(opts.seed);
    std::vector<LatencyRow> out;
    for (auto n : sizes) {
        if (n < 1) throw std::invalid_argument("measure_latency: sizes must be >= 1");
        std::vector<Event> events;
        events.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            events.push_back(Event{"case-0", "a" + std::to_string(rng() % opts.species), static_cast<Timestamp>(i)});

        AdaptiveConfig cfg = opts.adaptive;
        cfg.min_window_size = n;
        std::vector<double> samples;
        samples.reserve(opts.trials);
        std::size_t sink = 0;
        for (std::size_t t = 0; t < opts.trials; ++t) {
            AdaptiveWindow w(cfg, opts.view);
            const auto t0 = clock::now();
            std::optional<WindowRecord> rec;
            for (const auto& e : events)
                if ((rec = w.process(e))) break;
            if (!rec) rec = w.flush();
            const auto t1 = clock::now();
            sink += rec->size;
            samples.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        }
        if (sink != n * opts.trials) throw std::logic_error("measure_latency: window did not span n events");
        out.push_back({n, quantile(samples, 0.5), quantile(samples, 0.95)});
    }
    return out;
}

inline MetricsTable latency_table(const std::vector<LatencyRow>& rows) {
    MetricsTable t;
    t.header = {"n", "median_us", "p95_us"};
    for (const auto& r : rows) t.rows.push_back({std::to_string(r.n), format_double(r.median_us), format_double(r.p95_us)});
    return t;
}

struct ThroughputReport {
    std::size_t events = 0;
    std::vector<double> events_per_sec;
    double mean = 0.0;
    double std = 0.0;
};

/// Replays a file at full speed through a fresh pipeline per run, parsing
/// included, and reports events per second.
inline ThroughputReport measure_throughput(const std::string& path, const std::function<Pipeline()>& make_pipeline,
                                           std::size_t runs = 5) {
    using clock = std::chrono::steady_clock;
    ThroughputReport rep;
    ReplayOptions opts;
    opts.format = format_for_path(path);
    for (std::size_t i = 0; i < runs; ++i) {
        Pipeline p = make_pipeline();
        const auto t0 = clock::now();
        const auto st = replay_file(path, opts, [&](const Event& e) { p.process(e); });
        p.flush();
        const double secs = std::chrono::duration<double>(clock::now() - t0).count();
        rep.events = st.delivered;
        rep.events_per_sec.push_back(static_cast<double>(st.delivered) / secs);
    }
    rep.mean = mean(rep.events_per_sec);
    rep.std = stddev(rep.events_per_sec);
    return rep;
}

inline MetricsTable throughput_table(const ThroughputReport& rep) {
    MetricsTable t;
    t.header = {"run", "events", "events_per_sec"};
    for (std::size_t i = 0; i < rep.events_per_sec.size(); ++i)
        t.rows.push_back({std::to_string(i), std::to_string(rep.events), format_double(rep.events_per_sec[i])});
    return t;
}

inline MetricsTable drift_report_table(const std::vector<DriftReportRow>& rows) {
    MetricsTable t;
    t.header = {"drift_case", "drift_window", "before", "after", "mean_relative_change", "std_relative_change",
                "coefficient_of_variation", "pre_mean", "during_mean", "post_mean"};
    for (const auto& row : rows) {
        const auto& r = row.report;
        t.rows.push_back({std::to_string(row.drift_case), std::to_string(row.drift_window), std::to_string(row.before),
                          std::to_string(row.after), format_double(r.mean_relative_change),
                          format_double(r.std_relative_change), format_double(r.coefficient_of_variation),
                          format_double(r.pre_mean), format_double(r.during_mean), format_double(r.post_mean)});
    }
    return t;
}

inline MetricsTable window_sizes_table(const std::vector<WindowRecord>& records) {
    MetricsTable t;
    t.header = {"index", "size", "first_ts", "last_ts", "coverage", "threshold"};
    for (const auto& r : records)
        t.rows.push_back({std::to_string(r.index), std::to_string(r.size), std::to_string(r.first_ts),
                          std::to_string(r.last_ts), format_double(r.final_coverage),
                          format_double(r.threshold_at_close)});
    return t;
}

/// A synthetic stream of exactly `events` events: the built-in sudden
/// scenario with enough cases, cut at the requested length.
inline std::vector<Event> synthetic_stream(std::size_t events, std::uint64_t seed = 42) {
    auto spec = driftgen::builtin_scenario("sudden", seed);
    spec.total_cases = events / 3 + 1;
    auto log = driftgen::generate(spec);
    log.events.resize(std::min(events, log.events.size()));
    return std::move(log.events);
}

} // namespace covwin::bench
