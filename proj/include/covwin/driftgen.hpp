#pragma once

#include "covwin/event.hpp"
#include "covwin/wire_format.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace covwin::driftgen {

enum class DriftKind { sudden, gradual, recurring, incremental };

inline std::string_view to_string(DriftKind k) noexcept {
    switch (k) {
    case DriftKind::sudden: return "sudden";
    case DriftKind::gradual: return "gradual";
    case DriftKind::recurring: return "recurring";
    case DriftKind::incremental: return "incremental";
    }
    return "unknown";
}

inline DriftKind parse_drift_kind(std::string_view s) {
    if (s == "sudden") return DriftKind::sudden;
    if (s == "gradual") return DriftKind::gradual;
    if (s == "recurring") return DriftKind::recurring;
    if (s == "incremental") return DriftKind::incremental;
    throw std::invalid_argument("unknown drift kind '" + std::string(s) + "'");
}

struct Variant {
    std::vector<std::string> activities;
    double weight = 1.0;
};

/// Weighted trace variants plus the timing used for their cases.
struct VariantPool {
    std::vector<Variant> variants;
    Timestamp inter_event_gap = 100;
    Timestamp inter_case_gap = 300;
};

struct DriftSpec {
    DriftKind kind = DriftKind::sudden;
    std::vector<VariantPool> pools;
    std::size_t total_cases = 1000;
    double drift_position = 0.5;
    double ramp_start = 0.4;
    double ramp_end = 0.6;
    std::size_t season_length = 25;
    std::size_t increments = 1;
    std::uint64_t seed = 42;
    Timestamp start_timestamp = 1'704'067'200'000; // 2024-01-01T00:00:00Z

    std::size_t expected_pools() const {
        return kind == DriftKind::incremental ? increments + 1 : 2;
    }

    /// Throws std::invalid_argument describing the first problem found.
    void validate() const {
        if (total_cases == 0) throw std::invalid_argument("total_cases must be > 0");
        if (pools.size() != expected_pools())
            throw std::invalid_argument("drift kind '" + std::string(to_string(kind)) + "' needs " +
                                        std::to_string(expected_pools()) + " pools, got " + std::to_string(pools.size()));
        for (const auto& p : pools) {
            if (p.variants.empty()) throw std::invalid_argument("every pool needs at least one variant");
            if (p.inter_event_gap <= 0 || p.inter_case_gap <= 0) throw std::invalid_argument("gaps must be > 0");
            for (const auto& v : p.variants) {
                if (v.activities.empty()) throw std::invalid_argument("variants must be non-empty");
                if (!(v.weight > 0.0)) throw std::invalid_argument("variant weights must be > 0");
                for (const auto& a : v.activities)
                    if (a.empty() || contains_separator(a)) throw std::invalid_argument("bad activity name '" + a + "'");
            }
        }
        auto in_unit = [](double f) { return f > 0.0 && f < 1.0; };
        switch (kind) {
        case DriftKind::sudden:
            if (!in_unit(drift_position)) throw std::invalid_argument("drift_position must be in (0,1)");
            break;
        case DriftKind::gradual:
            if (!in_unit(ramp_start) || !in_unit(ramp_end) || !(ramp_start < ramp_end))
                throw std::invalid_argument("ramp interval must satisfy 0 < start < end < 1");
            break;
        case DriftKind::recurring:
            if (season_length == 0) throw std::invalid_argument("season_length must be > 0");
            break;
        case DriftKind::incremental:
            if (increments == 0) throw std::invalid_argument("increments must be > 0");
            break;
        }
    }
};

struct Annotations {
    std::vector<std::size_t> drift_case_indices;
    std::vector<std::size_t> pool_per_case;
};

struct GeneratedLog {
    std::vector<Event> events;
    Annotations annotations;
};

inline std::string case_name(std::size_t index) { return "case-" + std::to_string(index); }

/// Inverse of case_name; npos for foreign ids.
inline std::size_t case_index(std::string_view id) {
    constexpr std::string_view prefix = "case-";
    if (id.substr(0, prefix.size()) != prefix) return std::string::npos;
    std::size_t v = 0;
    auto tail = id.substr(prefix.size());
    auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), v);
    return (ec == std::errc{} && ptr == tail.data() + tail.size()) ? v : std::string::npos;
}

/// Probability that case `k` is drawn from the second pool of a gradual drift.
inline double gradual_share(const DriftSpec& spec, std::size_t k) {
    const double f = static_cast<double>(k) / static_cast<double>(spec.total_cases);
    if (f < spec.ramp_start) return 0.0;
    if (f >= spec.ramp_end) return 1.0;
    return (f - spec.ramp_start) / (spec.ramp_end - spec.ramp_start);
}

namespace detail {

/// Uniform double in [0,1) from the top 53 bits; independent of the
/// standard library's distribution implementations.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t first_case_at(double fraction, std::size_t total) {
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total)));
}

} // namespace detail

/// Samples a stream with the drift described by `spec`. Cases are drawn
/// wholly from one pool. Case k starts inter_case_gap after case k-1; event
/// gaps inside a case are jittered uniformly in [gap/2, 3*gap/2]. Events of
/// concurrent cases interleave by timestamp, ties are pushed forward by 1 ms
/// so timestamps strictly increase. Deterministic per seed.
inline GeneratedLog generate(const DriftSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const std::size_t total = spec.total_cases;
    GeneratedLog out;
    auto& ann = out.annotations;
    ann.pool_per_case.reserve(total);

    const std::size_t sudden_at = detail::first_case_at(spec.drift_position, total);
    for (std::size_t k = 0; k < total; ++k) {
        std::size_t pool = 0;
        switch (spec.kind) {
        case DriftKind::sudden: pool = k < sudden_at ? 0 : 1; break;
        case DriftKind::gradual: pool = detail::unit(rng) < gradual_share(spec, k) ? 1 : 0; break;
        case DriftKind::recurring: pool = (k / spec.season_length) % 2; break;
        case DriftKind::incremental:
            pool = std::min(k * (spec.increments + 1) / total, spec.increments);
            break;
        }
        ann.pool_per_case.push_back(pool);
    }

    switch (spec.kind) {
    case DriftKind::sudden: ann.drift_case_indices = {sudden_at}; break;
    case DriftKind::gradual:
        ann.drift_case_indices = {detail::first_case_at(spec.ramp_start, total), detail::first_case_at(spec.ramp_end, total)};
        break;
    case DriftKind::recurring:
    case DriftKind::incremental:
        for (std::size_t k = 1; k < total; ++k)
            if (ann.pool_per_case[k] != ann.pool_per_case[k - 1]) ann.drift_case_indices.push_back(k);
        break;
    }

    // (time, case, position) keys give a total order before tie-breaking.
    std::vector<std::tuple<Timestamp, std::size_t, std::size_t, const std::string*>> raw;
    Timestamp case_start = spec.start_timestamp;
    for (std::size_t k = 0; k < total; ++k) {
        const VariantPool& pool = spec.pools[ann.pool_per_case[k]];
        if (k > 0) case_start += pool.inter_case_gap;

        double weight_sum = 0.0;
        for (const auto& v : pool.variants) weight_sum += v.weight;
        double u = detail::unit(rng) * weight_sum;
        const Variant* chosen = &pool.variants.back();
        for (const auto& v : pool.variants) {
            if (u < v.weight) {
                chosen = &v;
                break;
            }
            u -= v.weight;
        }

        Timestamp t = case_start;
        for (std::size_t j = 0; j < chosen->activities.size(); ++j) {
            if (j > 0) {
                const double jitter = 0.5 + detail::unit(rng);
                t += std::max<Timestamp>(1, std::llround(static_cast<double>(pool.inter_event_gap) * jitter));
            }
            raw.emplace_back(t, k, j, &chosen->activities[j]);
        }
    }
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a), std::get<2>(a)) <
               std::tie(std::get<0>(b), std::get<1>(b), std::get<2>(b));
    });

    out.events.reserve(raw.size());
    Timestamp prev = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        Timestamp t = std::get<0>(raw[i]);
        if (i > 0 && t <= prev) t = prev + 1;
        prev = t;
        out.events.push_back(Event{case_name(std::get<1>(raw[i])), *std::get<3>(raw[i]), t});
    }
    return out;
}

/// Directly-follows pairs of every variant of a pool.
inline std::set<std::pair<std::string, std::string>> pool_dfg(const VariantPool& pool) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& v : pool.variants)
        for (std::size_t i = 0; i + 1 < v.activities.size(); ++i) out.emplace(v.activities[i], v.activities[i + 1]);
    return out;
}

// ----------------------------------------------------------------------------
// JSON
// ----------------------------------------------------------------------------

inline DriftSpec spec_from_json(const nlohmann::json& j) {
    try {
        DriftSpec s;
        s.kind = parse_drift_kind(j.at("kind").get<std::string>());
        s.total_cases = j.value("total_cases", s.total_cases);
        s.drift_position = j.value("drift_position", s.drift_position);
        if (j.contains("ramp_interval")) {
            const auto& r = j.at("ramp_interval");
            if (!r.is_array() || r.size() != 2) throw std::invalid_argument("ramp_interval must be [start, end]");
            s.ramp_start = r[0].get<double>();
            s.ramp_end = r[1].get<double>();
        }
        s.season_length = j.value("season_length", s.season_length);
        s.increments = j.value("increments", s.increments);
        s.seed = j.value("seed", s.seed);
        s.start_timestamp = j.value("start_timestamp", s.start_timestamp);
        for (const auto& jp : j.at("pools")) {
            VariantPool p;
            p.inter_event_gap = jp.value("inter_event_gap", p.inter_event_gap);
            p.inter_case_gap = jp.value("inter_case_gap", p.inter_case_gap);
            for (const auto& jv : jp.at("variants")) {
                Variant v;
                if (jv.is_array()) {
                    v.activities = jv.get<std::vector<std::string>>();
                } else {
                    v.activities = jv.at("activities").get<std::vector<std::string>>();
                    v.weight = jv.value("weight", 1.0);
                }
                p.variants.push_back(std::move(v));
            }
            s.pools.push_back(std::move(p));
        }
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("bad drift spec: ") + e.what());
    }
}

inline nlohmann::ordered_json spec_to_json(const DriftSpec& s) {
    nlohmann::ordered_json j;
    j["kind"] = std::string(to_string(s.kind));
    j["total_cases"] = s.total_cases;
    j["drift_position"] = s.drift_position;
    j["ramp_interval"] = {s.ramp_start, s.ramp_end};
    j["season_length"] = s.season_length;
    j["increments"] = s.increments;
    j["seed"] = s.seed;
    j["start_timestamp"] = s.start_timestamp;
    auto pools = nlohmann::ordered_json::array();
    for (const auto& p : s.pools) {
        nlohmann::ordered_json jp;
        jp["inter_event_gap"] = p.inter_event_gap;
        jp["inter_case_gap"] = p.inter_case_gap;
        auto vs = nlohmann::ordered_json::array();
        for (const auto& v : p.variants) vs.push_back({{"activities", v.activities}, {"weight", v.weight}});
        jp["variants"] = std::move(vs);
        pools.push_back(std::move(jp));
    }
    j["pools"] = std::move(pools);
    return j;
}

inline DriftSpec read_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument("'" + path + "' is not valid JSON");
    return spec_from_json(j);
}

inline nlohmann::ordered_json annotations_to_json(const Annotations& a) {
    nlohmann::ordered_json j;
    j["drift_case_indices"] = a.drift_case_indices;
    j["pool_per_case"] = a.pool_per_case;
    return j;
}

inline Annotations annotations_from_json(const nlohmann::json& j) {
    return {j.at("drift_case_indices").get<std::vector<std::size_t>>(), j.at("pool_per_case").get<std::vector<std::size_t>>()};
}

inline std::string annotations_path(const std::string& stream_path) { return stream_path + ".annotations.json"; }

/// Writes the stream plus its annotations sidecar next to it.
inline void to_stream_file(const GeneratedLog& log, const std::string& path, Format format) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + path + "'");
        write_events(out, log.events, format);
        if (!out) throw std::runtime_error("write failed for '" + path + "'");
    }
    std::ofstream side(annotations_path(path), std::ios::binary);
    if (!side) throw std::runtime_error("cannot write '" + annotations_path(path) + "'");
    side << annotations_to_json(log.annotations).dump(2) << '\n';
}

// ----------------------------------------------------------------------------
// Built-in scenarios
// ----------------------------------------------------------------------------

namespace detail {

inline std::vector<Variant> orderings(const std::string& head, std::vector<std::string> body) {
    std::sort(body.begin(), body.end());
    std::vector<Variant> out;
    do {
        Variant v;
        v.activities.push_back(head);
        v.activities.insert(v.activities.end(), body.begin(), body.end());
        out.push_back(std::move(v));
    } while (std::next_permutation(body.begin(), body.end()));
    return out;
}

} // namespace detail

/// Three activities: A followed by B and C in either order.
inline VariantPool three_activity_pool() { return {detail::orderings("A", {"B", "C"}), 100, 300}; }

/// Five activities: A followed by B, C, D and E in any order.
inline VariantPool five_activity_pool() { return {detail::orderings("A", {"B", "C", "D", "E"}), 100, 300}; }

/// A single repeating variant over the first `alphabet` letters.
inline VariantPool repeating_pool(std::size_t alphabet) {
    Variant v;
    for (std::size_t i = 0; i < alphabet; ++i) v.activities.emplace_back(1, static_cast<char>('A' + i));
    return {{v}, 100, 100 * static_cast<Timestamp>(alphabet)};
}

/// Scenario names accepted by the CLI: sudden, gradual, recurring,
/// incremental. All switch from the three- to the five-activity pool.
inline DriftSpec builtin_scenario(std::string_view name, std::uint64_t seed = 42) {
    DriftSpec s;
    s.seed = seed;
    s.kind = parse_drift_kind(name);
    s.pools = {three_activity_pool(), five_activity_pool()};
    switch (s.kind) {
    case DriftKind::sudden:
        s.total_cases = 1000;
        s.drift_position = 0.1;
        break;
    case DriftKind::gradual:
        s.total_cases = 1000;
        s.ramp_start = 0.4;
        s.ramp_end = 0.6;
        break;
    case DriftKind::recurring:
        s.total_cases = 800;
        s.season_length = 100;
        break;
    case DriftKind::incremental: {
        s.total_cases = 1000;
        s.increments = 2;
        VariantPool mid{detail::orderings("A", {"B", "C", "D"}), 100, 300};
        s.pools = {three_activity_pool(), mid, five_activity_pool()};
        break;
    }
    }
    return s;
}

} // namespace covwin::driftgen
