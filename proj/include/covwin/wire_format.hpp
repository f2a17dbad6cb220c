#pragma once

#include "covwin/event.hpp"
#include "covwin/window_record.hpp"

#include <json.hpp>

#include <array>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

namespace covwin {

enum class Format { csv, jsonl };

inline std::string_view to_string(Format f) noexcept { return f == Format::csv ? "csv" : "jsonl"; }

inline Format parse_format(std::string_view s) {
    if (s == "csv") return Format::csv;
    if (s == "jsonl" || s == "json" || s == "ndjson") return Format::jsonl;
    throw std::invalid_argument("unknown format '" + std::string(s) + "'");
}

/// Guesses the format from a file extension; JSONL unless it ends in .csv.
inline Format format_for_path(std::string_view path) {
    return path.size() >= 4 && path.substr(path.size() - 4) == ".csv" ? Format::csv : Format::jsonl;
}

enum class ParseErrorCode { malformed, missing_case, missing_activity, missing_timestamp, bad_timestamp, reserved_separator };

inline std::string_view to_string(ParseErrorCode c) noexcept {
    switch (c) {
    case ParseErrorCode::malformed: return "malformed";
    case ParseErrorCode::missing_case: return "missing_case";
    case ParseErrorCode::missing_activity: return "missing_activity";
    case ParseErrorCode::missing_timestamp: return "missing_timestamp";
    case ParseErrorCode::bad_timestamp: return "bad_timestamp";
    case ParseErrorCode::reserved_separator: return "reserved_separator";
    }
    return "unknown";
}

struct ParseError {
    ParseErrorCode code = ParseErrorCode::malformed;
    std::size_t line = 0;
    std::string message;

    std::string describe() const {
        return "line " + std::to_string(line) + ": " + std::string(to_string(code)) + ": " + message;
    }
};

using ParseResult = std::variant<Event, ParseError>;

inline std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// ----------------------------------------------------------------------------
// Timestamps
// ----------------------------------------------------------------------------

namespace detail {

inline bool read_digits(std::string_view s, std::size_t& pos, std::size_t count, int& out) {
    if (pos + count > s.size()) return false;
    int v = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    pos += count;
    out = v;
    return true;
}

inline bool expect(std::string_view s, std::size_t& pos, char c) {
    if (pos >= s.size() || s[pos] != c) return false;
    ++pos;
    return true;
}

} // namespace detail

/// RFC 3339 date-time ("2014-10-22T11:15:41Z", optional fraction, 'Z' or
/// +hh:mm offset; a space is accepted in place of 'T') to epoch millis.
inline std::optional<Timestamp> parse_rfc3339(std::string_view s) {
    using namespace std::chrono;
    std::size_t p = 0;
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (!detail::read_digits(s, p, 4, y) || !detail::expect(s, p, '-') || !detail::read_digits(s, p, 2, mo) ||
        !detail::expect(s, p, '-') || !detail::read_digits(s, p, 2, d))
        return std::nullopt;
    if (p >= s.size() || (s[p] != 'T' && s[p] != 't' && s[p] != ' ')) return std::nullopt;
    ++p;
    if (!detail::read_digits(s, p, 2, h) || !detail::expect(s, p, ':') || !detail::read_digits(s, p, 2, mi) ||
        !detail::expect(s, p, ':') || !detail::read_digits(s, p, 2, sec))
        return std::nullopt;

    std::int64_t millis = 0;
    if (p < s.size() && s[p] == '.') {
        ++p;
        int digits = 0;
        while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) {
            if (digits < 3) millis = millis * 10 + (s[p] - '0');
            ++digits;
            ++p;
        }
        if (digits == 0) return std::nullopt;
        for (int i = digits; i < 3; ++i) millis *= 10;
    }

    std::int64_t offset_min = 0;
    if (p < s.size() && (s[p] == 'Z' || s[p] == 'z')) {
        ++p;
    } else if (p < s.size() && (s[p] == '+' || s[p] == '-')) {
        const int sign = s[p] == '-' ? -1 : 1;
        ++p;
        int oh = 0, om = 0;
        if (!detail::read_digits(s, p, 2, oh) || !detail::expect(s, p, ':') || !detail::read_digits(s, p, 2, om))
            return std::nullopt;
        offset_min = sign * (oh * 60 + om);
    } else {
        return std::nullopt;
    }
    if (p != s.size()) return std::nullopt;

    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
    const auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} + milliseconds{millis} -
                    minutes{offset_min};
    return duration_cast<milliseconds>(tp.time_since_epoch()).count();
}

/// Integer milliseconds or an RFC 3339 string.
inline std::optional<Timestamp> parse_timestamp_text(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    Timestamp v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc{} && ptr == s.data() + s.size()) return v;
    return parse_rfc3339(s);
}

// ----------------------------------------------------------------------------
// CSV
// ----------------------------------------------------------------------------

/// Splits one CSV record. Handles double-quoted fields with "" escapes.
inline std::optional<std::vector<std::string>> split_csv(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"' && trim(cur).empty()) {
            cur.clear();
            quoted = was_quoted = true;
        } else if (c == ',') {
            fields.push_back(was_quoted ? cur : std::string(trim(cur)));
            cur.clear();
            was_quoted = false;
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) return std::nullopt;
    fields.push_back(was_quoted ? cur : std::string(trim(cur)));
    return fields;
}

inline std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos && trim(s).size() == s.size()) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// Column positions of a CSV event file, taken from its header row.
struct CsvLayout {
    std::size_t case_col = 0;
    std::size_t activity_col = 1;
    std::size_t timestamp_col = 2;

    static std::optional<CsvLayout> from_header(std::string_view header) {
        auto fields = split_csv(header);
        if (!fields) return std::nullopt;
        std::optional<std::size_t> c, a, t;
        for (std::size_t i = 0; i < fields->size(); ++i) {
            const auto& f = (*fields)[i];
            if (f == "case_id" || f == "case") c = i;
            else if (f == "activity") a = i;
            else if (f == "timestamp") t = i;
        }
        if (!c || !a || !t) return std::nullopt;
        return CsvLayout{*c, *a, *t};
    }
};

inline constexpr std::string_view kCsvHeader = "case_id,activity,timestamp";

// ----------------------------------------------------------------------------
// Events
// ----------------------------------------------------------------------------

namespace detail {

inline ParseResult finish_event(std::string case_id, std::string activity, std::optional<Timestamp> ts,
                                std::size_t line) {
    if (case_id.empty()) return ParseError{ParseErrorCode::missing_case, line, "case id is missing"};
    if (activity.empty()) return ParseError{ParseErrorCode::missing_activity, line, "activity is missing"};
    if (contains_separator(activity))
        return ParseError{ParseErrorCode::reserved_separator, line,
                          std::string("activity contains reserved character '") + kSeparator + "'"};
    if (!ts) return ParseError{ParseErrorCode::bad_timestamp, line, "timestamp is not integer ms or RFC 3339"};
    return Event{std::move(case_id), std::move(activity), *ts};
}

inline ParseResult parse_jsonl_event(std::string_view text, std::size_t line) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return ParseError{ParseErrorCode::malformed, line, "not a JSON object"};

    auto string_field = [&](const char* key) -> std::optional<std::string> {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) return std::nullopt;
        if (it->is_string()) return std::string(trim(it->get_ref<const std::string&>()));
        if (it->is_number_integer()) return it->dump();
        return std::string{};
    };
    auto case_id = string_field("case");
    if (!case_id || case_id->empty()) return ParseError{ParseErrorCode::missing_case, line, "missing field 'case'"};
    auto activity = string_field("activity");
    if (!activity || activity->empty())
        return ParseError{ParseErrorCode::missing_activity, line, "missing field 'activity'"};

    auto it = j.find("timestamp");
    if (it == j.end() || it->is_null())
        return ParseError{ParseErrorCode::missing_timestamp, line, "missing field 'timestamp'"};
    std::optional<Timestamp> ts;
    if (it->is_number_integer()) ts = it->get<Timestamp>();
    else if (it->is_string()) ts = parse_timestamp_text(it->get_ref<const std::string&>());
    return finish_event(std::move(*case_id), std::move(*activity), ts, line);
}

inline ParseResult parse_csv_event(std::string_view text, std::size_t line, const CsvLayout& layout) {
    auto fields = split_csv(text);
    if (!fields) return ParseError{ParseErrorCode::malformed, line, "unterminated quote"};
    auto field = [&](std::size_t col) -> std::string { return col < fields->size() ? (*fields)[col] : std::string{}; };
    std::string case_id = field(layout.case_col);
    std::string activity = field(layout.activity_col);
    if (case_id.empty()) return ParseError{ParseErrorCode::missing_case, line, "missing column 'case_id'"};
    if (activity.empty()) return ParseError{ParseErrorCode::missing_activity, line, "missing column 'activity'"};
    if (layout.timestamp_col >= fields->size() || trim((*fields)[layout.timestamp_col]).empty())
        return ParseError{ParseErrorCode::missing_timestamp, line, "missing column 'timestamp'"};
    return finish_event(std::move(case_id), std::move(activity), parse_timestamp_text(field(layout.timestamp_col)),
                        line);
}

} // namespace detail

/// Parses one wire line into an Event with its timestamp in integer ms.
inline ParseResult parse_event(std::string_view text, Format format, std::size_t line = 0,
                               const CsvLayout& layout = {}) {
    text = trim(text);
    return format == Format::jsonl ? detail::parse_jsonl_event(text, line)
                                   : detail::parse_csv_event(text, line, layout);
}

inline nlohmann::ordered_json event_to_json(const Event& e) {
    nlohmann::ordered_json j;
    j["case"] = e.case_id;
    j["activity"] = e.activity;
    j["timestamp"] = e.timestamp;
    return j;
}

inline void write_event(std::ostream& os, const Event& e, Format format) {
    if (format == Format::jsonl) {
        os << event_to_json(e).dump() << '\n';
    } else {
        os << csv_escape(e.case_id) << ',' << csv_escape(e.activity) << ',' << e.timestamp << '\n';
    }
}

inline void write_events(std::ostream& os, const std::vector<Event>& events, Format format) {
    if (format == Format::csv) os << kCsvHeader << '\n';
    for (const auto& e : events) write_event(os, e, format);
}

// ----------------------------------------------------------------------------
// Window records (JSONL, fixed key order)
// ----------------------------------------------------------------------------

inline nlohmann::ordered_json window_record_to_json(const WindowRecord& r) {
    nlohmann::ordered_json j;
    j["index"] = r.index;
    j["size"] = r.size;
    j["first_ts"] = r.first_ts;
    j["last_ts"] = r.last_ts;
    j["final_coverage"] = r.final_coverage;
    j["final_completeness"] = r.final_completeness;
    j["chao1"] = r.chao1;
    j["threshold_at_close"] = r.threshold_at_close;
    j["force_closed"] = r.force_closed;
    auto events = nlohmann::ordered_json::array();
    for (const auto& e : r.events) events.push_back(event_to_json(e));
    j["events"] = std::move(events);
    return j;
}

inline void write_window_record(std::ostream& os, const WindowRecord& r) {
    os << window_record_to_json(r).dump() << '\n';
}

/// Inverse of write_window_record. Throws std::invalid_argument on bad input.
inline WindowRecord parse_window_record(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        WindowRecord r;
        r.index = j.at("index").get<std::uint64_t>();
        r.size = j.at("size").get<std::size_t>();
        r.first_ts = j.at("first_ts").get<Timestamp>();
        r.last_ts = j.at("last_ts").get<Timestamp>();
        r.final_coverage = j.at("final_coverage").get<double>();
        r.final_completeness = j.at("final_completeness").get<double>();
        r.chao1 = j.at("chao1").get<double>();
        r.threshold_at_close = j.at("threshold_at_close").get<double>();
        r.force_closed = j.at("force_closed").get<bool>();
        for (const auto& e : j.at("events")) {
            r.events.push_back(
                Event{e.at("case").get<std::string>(), e.at("activity").get<std::string>(), e.at("timestamp").get<Timestamp>()});
        }
        return r;
    } catch (const nlohmann::json::exception& ex) {
        throw std::invalid_argument(std::string("bad window record: ") + ex.what());
    }
}

// ----------------------------------------------------------------------------
// Metrics CSV
// ----------------------------------------------------------------------------

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return ec == std::errc{} ? std::string(buf.data(), ptr) : std::string("nan");
}

inline constexpr std::string_view kWindowSizesHeader = "index,size,first_ts,last_ts,coverage,threshold";

inline void write_window_sizes_header(std::ostream& os) { os << kWindowSizesHeader << '\n'; }

inline void write_window_sizes_row(std::ostream& os, const WindowRecord& r) {
    os << r.index << ',' << r.size << ',' << r.first_ts << ',' << r.last_ts << ',' << format_double(r.final_coverage)
       << ',' << format_double(r.threshold_at_close) << '\n';
}

/// Generic metrics table: a header row and already formatted cells.
struct MetricsTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write_csv(std::ostream& os) const {
        auto write_row = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) os << ',';
                os << csv_escape(cells[i]);
            }
            os << '\n';
        };
        write_row(header);
        for (const auto& r : rows) write_row(r);
    }
};

} // namespace covwin
