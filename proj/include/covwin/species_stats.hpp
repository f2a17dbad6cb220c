#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>

namespace covwin {

/// Opaque species token: an activity name, a joined n-gram, a
/// directly-follows pair or a whole trace variant.
using SpeciesId = std::string;

// ----------------------------------------------------------------------------
// AbundanceStats
//
// Abundance counts for one sample (one open window). Every observation is an
// individual belonging to exactly one species. Alongside the per-species
// counts X_i we keep
//   n    number of observations
//   S_N  number of distinct species
//   f1   species seen exactly once
//   f2   species seen exactly twice
// f1/f2 are maintained from the transition of the touched species' count
// only (1 -> f1++, 2 -> f1--/f2++, 3 -> f2--), so observe() never scans the
// map.
//
// Single writer. Copies are independent snapshots.
// ----------------------------------------------------------------------------
class AbundanceStats {
public:
    using CountMap = std::unordered_map<SpeciesId, std::uint64_t>;

    void observe(std::string_view species) {
        auto it = counts_.try_emplace(SpeciesId(species), 0).first;
        const std::uint64_t x = ++it->second;
        ++n_;
        switch (x) {
        case 1: ++f1_; break;
        case 2: --f1_; ++f2_; break;
        case 3: --f2_; break;
        default: break;
        }
    }

    void reset() noexcept {
        counts_.clear();
        n_ = f1_ = f2_ = 0;
    }

    std::uint64_t n() const noexcept { return n_; }
    std::uint64_t distinct() const noexcept { return counts_.size(); }
    std::uint64_t singletons() const noexcept { return f1_; }
    std::uint64_t doubletons() const noexcept { return f2_; }
    const CountMap& counts() const noexcept { return counts_; }

    std::uint64_t count(std::string_view species) const {
        auto it = counts_.find(SpeciesId(species));
        return it == counts_.end() ? 0 : it->second;
    }

    bool empty() const noexcept { return n_ == 0; }

    friend bool operator==(const AbundanceStats&, const AbundanceStats&) = default;

private:
    CountMap counts_;
    std::uint64_t n_ = 0;
    std::uint64_t f1_ = 0;
    std::uint64_t f2_ = 0;
};

struct Estimates {
    double chao1 = 0.0;
    double completeness = 0.0;
    double coverage = 0.0;

    friend bool operator==(const Estimates&, const Estimates&) = default;
};

/// Chao1 richness estimate. Uses the bias-corrected form when no doubletons
/// have been seen. Zero for an empty sample.
inline double chao1(const AbundanceStats& s) noexcept {
    if (s.n() == 0) return 0.0;
    const auto sn = static_cast<double>(s.distinct());
    const auto f1 = static_cast<double>(s.singletons());
    const auto f2 = static_cast<double>(s.doubletons());
    if (s.doubletons() > 0) return sn + (f1 * f1) / (2.0 * f2);
    return sn + f1 * (f1 - 1.0) / 2.0;
}

/// Observed over estimated species, in (0, 1]; zero for an empty sample.
inline double completeness(const AbundanceStats& s) noexcept {
    const double est = chao1(s);
    if (est <= 0.0) return 0.0;
    return std::clamp(static_cast<double>(s.distinct()) / est, 0.0, 1.0);
}

/// Estimated share of the species probability mass present in the sample.
///
/// A single observation (n = 1, f1 = 1, f2 = 0) makes the correction
/// denominator vanish; it carries no reobservation evidence, so its coverage
/// is 0.
inline double coverage(const AbundanceStats& s) noexcept {
    if (s.n() == 0) return 0.0;
    if (s.singletons() == 0) return 1.0;
    const auto n = static_cast<double>(s.n());
    const auto f1 = static_cast<double>(s.singletons());
    const auto f2 = static_cast<double>(s.doubletons());
    const double denom = (n - 1.0) * f1 + 2.0 * f2;
    if (denom <= 0.0) return 0.0;
    const double cov = 1.0 - (f1 / n) * (1.0 - 2.0 * f2 / denom);
    return std::clamp(cov, 0.0, 1.0);
}

inline Estimates estimates(const AbundanceStats& s) noexcept {
    return {chao1(s), completeness(s), coverage(s)};
}

} // namespace covwin
