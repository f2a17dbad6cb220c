#pragma once

#include "covwin/event.hpp"
#include "covwin/wire_format.hpp"

#include <chrono>
#include <cstddef>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

namespace covwin {

/// Enforces non-decreasing timestamps on an event sequence. In strict mode a
/// regression is an error; otherwise the event is dropped and counted.
class OrderGate {
public:
    enum class Verdict { accept, drop, violation };

    explicit OrderGate(bool strict = true) : strict_(strict) {}

    Verdict admit(const Event& e) {
        if (last_ && e.timestamp < *last_) {
            if (strict_) return Verdict::violation;
            ++dropped_;
            return Verdict::drop;
        }
        last_ = e.timestamp;
        return Verdict::accept;
    }

    bool strict() const noexcept { return strict_; }
    std::size_t dropped() const noexcept { return dropped_; }
    std::optional<Timestamp> last() const noexcept { return last_; }

private:
    bool strict_;
    std::optional<Timestamp> last_;
    std::size_t dropped_ = 0;
};

/// Parse failure, ordering violation or unreadable source during replay.
class ReplayError : public std::runtime_error {
public:
    ReplayError(std::string what, std::size_t line) : std::runtime_error(std::move(what)), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct ReplayOptions {
    Format format = Format::jsonl;
    /// Multiplier on stream time; empty replays as fast as possible.
    std::optional<double> speed;
    bool strict_order = true;
};

struct ReplayStats {
    std::size_t lines = 0;
    std::size_t delivered = 0;
    std::size_t dropped = 0;
    double seconds = 0.0;
};

/// Parses "max" or a positive multiplier.
inline std::optional<double> parse_speed(std::string_view s) {
    if (s == "max") return std::nullopt;
    double v = 0.0;
    try {
        v = std::stod(std::string(s));
    } catch (const std::exception&) {
        throw std::invalid_argument("replay speed must be 'max' or a positive number");
    }
    if (!(v > 0.0)) throw std::invalid_argument("replay speed must be 'max' or a positive number");
    return v;
}

/// Delivers the events of a line-oriented source in file order.
inline ReplayStats replay(std::istream& in, const ReplayOptions& opts, const std::function<void(const Event&)>& sink) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    ReplayStats stats;
    OrderGate gate(opts.strict_order);
    CsvLayout layout;
    bool header_pending = opts.format == Format::csv;
    std::optional<Timestamp> first_ts;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (header_pending) {
            header_pending = false;
            if (auto l = CsvLayout::from_header(line)) {
                layout = *l;
                continue;
            }
        }
        ++stats.lines;
        auto parsed = parse_event(line, opts.format, line_no, layout);
        if (auto* err = std::get_if<ParseError>(&parsed)) throw ReplayError(err->describe(), line_no);
        const Event& e = std::get<Event>(parsed);

        switch (gate.admit(e)) {
        case OrderGate::Verdict::violation:
            throw ReplayError("line " + std::to_string(line_no) + ": timestamp " + std::to_string(e.timestamp) +
                                  " precedes " + std::to_string(*gate.last()),
                              line_no);
        case OrderGate::Verdict::drop:
            ++stats.dropped;
            continue;
        case OrderGate::Verdict::accept:
            break;
        }

        if (opts.speed) {
            if (!first_ts) first_ts = e.timestamp;
            const double offset_ms = static_cast<double>(e.timestamp - *first_ts) / *opts.speed;
            std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(
                                                      std::chrono::duration<double, std::milli>(offset_ms)));
        }
        sink(e);
        ++stats.delivered;
    }
    if (in.bad()) throw ReplayError("read error", line_no);
    stats.seconds = std::chrono::duration<double>(clock::now() - start).count();
    return stats;
}

inline ReplayStats replay_file(const std::string& path, const ReplayOptions& opts,
                               const std::function<void(const Event&)>& sink) {
    std::ifstream in(path);
    if (!in) throw ReplayError("cannot open '" + path + "'", 0);
    return replay(in, opts, sink);
}

/// Reads a whole event file into memory (fast, strict).
inline std::vector<Event> read_events(const std::string& path, std::optional<Format> format = std::nullopt) {
    std::vector<Event> out;
    ReplayOptions opts;
    opts.format = format.value_or(format_for_path(path));
    replay_file(path, opts, [&](const Event& e) { out.push_back(e); });
    return out;
}

} // namespace covwin
