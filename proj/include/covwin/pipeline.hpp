#pragma once

#include "covwin/adaptive_window.hpp"
#include "covwin/baseline_window.hpp"

#include <optional>
#include <string>
#include <variant>

namespace covwin {

/// Either the adaptive window or one of the baselines, behind one interface.
class Pipeline {
public:
    Pipeline(AdaptiveConfig config, ViewConfig view) : strategy_(std::in_place_type<AdaptiveWindow>, config, view) {}
    explicit Pipeline(BaselineConfig config) : strategy_(std::in_place_type<BaselineWindow>, std::move(config)) {}

    std::optional<WindowRecord> process(const Event& e) {
        return std::visit([&](auto& s) { return s.process(e); }, strategy_);
    }

    std::optional<WindowRecord> flush() {
        return std::visit([](auto& s) { return s.flush(); }, strategy_);
    }

    bool adaptive() const noexcept { return std::holds_alternative<AdaptiveWindow>(strategy_); }
    const AdaptiveWindow* adaptive_window() const noexcept { return std::get_if<AdaptiveWindow>(&strategy_); }

    std::string label() const {
        if (const auto* a = std::get_if<AdaptiveWindow>(&strategy_)) return "adaptive-" + a->view().config().label();
        return std::get<BaselineWindow>(strategy_).config().label();
    }

private:
    std::variant<AdaptiveWindow, BaselineWindow> strategy_;
};

} // namespace covwin
