// covwin: coverage-driven adaptive windows over event streams.

#include "covwin/covwin.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <pthread.h>
#include <signal.h>

#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace covwin;
namespace fs = std::filesystem;

namespace {

/// Bad configuration or arguments; exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum Exit { kOk = 0, kRuntime = 1, kUsage = 2 };

// ----------------------------------------------------------------------------
// Shared flag groups
// ----------------------------------------------------------------------------

struct ViewFlags {
    std::string kind = "act";
    int ngram_order = 1;
    Timestamp case_timeout = ViewConfig::kDefaultCaseTimeout;

    void add(CLI::App& app) {
        app.add_option("--view", kind, "Species view: act (activity n-gram), df (directly-follows), tv (trace variant)")
            ->check(CLI::IsMember({"act", "activity", "activity_ngram", "df", "directly_follows", "tv", "variant",
                                   "trace_variant"}))
            ->capture_default_str();
        app.add_option("--ngram-order", ngram_order, "n-gram order of the activity view (1-5)")->capture_default_str();
        app.add_option("--case-timeout", case_timeout, "Idle time in ms after which a case is complete")
            ->capture_default_str();
    }

    ViewConfig config() const {
        ViewConfig v{parse_view_kind(kind), ngram_order, case_timeout};
        v.validate();
        return v;
    }
};

struct StrategyFlags {
    std::string strategy = "adaptive";
    AdaptiveConfig adaptive;
    std::size_t count = 20;
    Timestamp duration = 60'000;
    std::string landmark;
    ViewFlags view;

    void add(CLI::App& app) {
        app.add_option("--strategy", strategy, "Window strategy: adaptive, count, time, landmark")
            ->check(CLI::IsMember({"adaptive", "count", "time", "landmark"}))
            ->capture_default_str();
        add_adaptive(app);
        app.add_option("--count", count, "Events per count-tumbling window")->capture_default_str();
        app.add_option("--duration", duration, "Milliseconds per time-tumbling window")->capture_default_str();
        app.add_option("--landmark", landmark, "Activity that opens a new landmark window");
        view.add(app);
    }

    void add_adaptive(CLI::App& app) {
        app.add_option("--initial-threshold", adaptive.initial_threshold, "Initial closing threshold ct0")
            ->capture_default_str();
        app.add_option("--initial-smoothing", adaptive.initial_smoothing, "Initial smoothing factor sf0")
            ->capture_default_str();
        app.add_option("--decay-rate", adaptive.decay_rate, "Threshold decay on stagnation dr")->capture_default_str();
        app.add_option("--min-threshold", adaptive.min_threshold, "Threshold floor mt")->capture_default_str();
        app.add_option("--stagnation-delta", adaptive.stagnation_delta, "Largest coverage step counted as stagnant")
            ->capture_default_str();
        app.add_option("--stagnation-window", adaptive.stagnation_window, "Coverage values checked for stagnation")
            ->capture_default_str();
        app.add_option("--min-window-size", adaptive.min_window_size, "Smallest window the adaptive strategy emits")
            ->capture_default_str();
    }

    /// Throws UsageError on invalid parameters.
    Pipeline make() const {
        try {
            if (strategy == "adaptive") return Pipeline(adaptive, view.config());
            BaselineConfig b;
            b.kind = parse_baseline_kind(strategy);
            b.count = count;
            b.duration = duration;
            b.landmark_activity = landmark;
            b.validate();
            return Pipeline(b);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
};

struct SourceFlags {
    std::string file;
    std::string format = "auto";
    std::string speed = "max";
    bool lenient = false;

    void add(CLI::App& app) {
        app.add_option("file", file, "Event file (CSV with header or JSONL)")->required();
        app.add_option("--format", format, "Input format: auto, csv, jsonl")
            ->check(CLI::IsMember({"auto", "csv", "jsonl"}))
            ->capture_default_str();
        app.add_option("--speed", speed, "Replay speed: max or a multiplier on stream time")->capture_default_str();
        app.add_flag("--lenient", lenient, "Drop out-of-order events instead of failing");
    }

    ReplayOptions options() const {
        ReplayOptions o;
        o.format = format == "auto" ? format_for_path(file) : parse_format(format);
        try {
            o.speed = parse_speed(speed);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        o.strict_order = !lenient;
        return o;
    }
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    return out;
}

void write_table(const MetricsTable& t, const std::string& path) {
    auto out = open_out(path);
    t.write_csv(out);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// Window sinks shared by analyze and listen.
struct WindowSinks {
    bool quiet = false;
    bool verbose = false;
    std::string windows_out;
    std::string sizes_out;

    std::unique_ptr<std::ofstream> windows_file;
    std::unique_ptr<std::ofstream> sizes_file;
    std::size_t windows = 0;
    std::size_t total_size = 0;
    std::size_t min_size = std::numeric_limits<std::size_t>::max();
    std::size_t max_size = 0;
    double coverage_sum = 0.0;

    void add(CLI::App& app) {
        app.add_option("--windows-out", windows_out, "Write closed windows as JSONL records to this file");
        app.add_option("--sizes-out", sizes_out, "Write window_sizes CSV to this file");
        app.add_flag("--quiet,-q", quiet, "Suppress per-window log lines");
        app.add_flag("--verbose,-v", verbose, "One JSON log record per closed window on stderr");
    }

    void open() {
        if (!windows_out.empty()) windows_file = std::make_unique<std::ofstream>(open_out(windows_out));
        if (!sizes_out.empty()) {
            sizes_file = std::make_unique<std::ofstream>(open_out(sizes_out));
            write_window_sizes_header(*sizes_file);
        }
    }

    void emit(const WindowRecord& r) {
        ++windows;
        total_size += r.size;
        min_size = std::min(min_size, r.size);
        max_size = std::max(max_size, r.size);
        coverage_sum += r.final_coverage;
        if (windows_file) write_window_record(*windows_file, r);
        if (sizes_file) write_window_sizes_row(*sizes_file, r);
        if (!quiet)
            std::cout << "window " << r.index << " size=" << r.size << " coverage=" << fmt(r.final_coverage)
                      << " threshold=" << fmt(r.threshold_at_close) << (r.force_closed ? " forced" : "") << '\n';
        if (verbose) {
            nlohmann::ordered_json j;
            j["event"] = "window_closed";
            j["index"] = r.index;
            j["size"] = r.size;
            j["first_ts"] = r.first_ts;
            j["last_ts"] = r.last_ts;
            j["coverage"] = r.final_coverage;
            j["completeness"] = r.final_completeness;
            j["chao1"] = r.chao1;
            j["threshold"] = r.threshold_at_close;
            j["force_closed"] = r.force_closed;
            std::cerr << j.dump() << '\n';
        }
    }

    void summary(std::size_t events, std::size_t dropped) const {
        std::cout << "events=" << events << " dropped=" << dropped << " windows=" << windows;
        if (windows > 0) {
            std::cout << " mean_size=" << fmt(static_cast<double>(total_size) / static_cast<double>(windows))
                      << " min_size=" << min_size << " max_size=" << max_size
                      << " mean_coverage=" << fmt(coverage_sum / static_cast<double>(windows));
        }
        std::cout << '\n';
    }

    void close() {
        if (windows_file && !windows_file->flush()) throw std::runtime_error("write failed for '" + windows_out + "'");
        if (sizes_file && !sizes_file->flush()) throw std::runtime_error("write failed for '" + sizes_out + "'");
    }
};

void print_estimates(const AbundanceStats& s) {
    const auto e = estimates(s);
    std::cout << "n=" << s.n() << " species=" << s.distinct() << " f1=" << s.singletons() << " f2=" << s.doubletons()
              << " chao1=" << format_double(e.chao1) << " completeness=" << format_double(e.completeness)
              << " coverage=" << format_double(e.coverage) << '\n';
}

/// Batch estimates of a whole file under one view.
int estimate_file(const SourceFlags& src, const ViewFlags& view) {
    ViewConfig cfg;
    try {
        cfg = view.config();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto opts = src.options();
    SpeciesView v(cfg);
    AbundanceStats stats;
    std::vector<SpeciesId> species;
    replay_file(src.file, opts, [&](const Event& e) {
        species.clear();
        v.extract(e, species);
        for (const auto& s : species) stats.observe(s);
    });
    for (const auto& s : v.flush_all()) stats.observe(s);
    print_estimates(stats);
    return kOk;
}

// ----------------------------------------------------------------------------
// analyze
// ----------------------------------------------------------------------------

struct AnalyzeCmd {
    SourceFlags source;
    StrategyFlags strategy;
    WindowSinks sinks;
    bool estimate_only = false;

    void add(CLI::App& app) {
        source.add(app);
        strategy.add(app);
        sinks.add(app);
        app.add_flag("--estimate-only", estimate_only, "Print whole-file estimates under the view and exit");
    }

    int run() {
        if (estimate_only) return estimate_file(source, strategy.view);
        Pipeline pipeline = strategy.make();
        const auto opts = source.options();
        sinks.open();
        const auto st = replay_file(source.file, opts, [&](const Event& e) {
            if (auto r = pipeline.process(e)) sinks.emit(*r);
        });
        if (auto r = pipeline.flush()) sinks.emit(*r);
        sinks.close();
        sinks.summary(st.delivered, st.dropped);
        return kOk;
    }
};

// ----------------------------------------------------------------------------
// estimate
// ----------------------------------------------------------------------------

struct EstimateCmd {
    SourceFlags source;
    ViewFlags view;

    void add(CLI::App& app) {
        source.add(app);
        view.add(app);
    }

    int run() { return estimate_file(source, view); }
};

// ----------------------------------------------------------------------------
// driftgen
// ----------------------------------------------------------------------------

driftgen::DriftSpec load_spec(const std::string& spec_file, const std::string& scenario) {
    if (!spec_file.empty() && !scenario.empty()) throw UsageError("use either --spec or --scenario, not both");
    if (spec_file.empty() && scenario.empty()) throw UsageError("one of --spec or --scenario is required");
    try {
        return spec_file.empty() ? driftgen::builtin_scenario(scenario) : driftgen::read_spec(spec_file);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

struct DriftgenCmd {
    std::string spec_file;
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> cases;
    std::string out;
    std::string format = "auto";

    void add(CLI::App& app) {
        app.add_option("--spec", spec_file, "Drift specification JSON file");
        app.add_option("--scenario", scenario, "Built-in scenario: sudden, gradual, recurring, incremental");
        app.add_option("--seed", seed, "Override the seed of the specification");
        app.add_option("--cases", cases, "Override the number of cases");
        app.add_option("--out,-o", out, "Output stream file; annotations go to <out>.annotations.json")->required();
        app.add_option("--format", format, "Output format: auto, csv, jsonl")
            ->check(CLI::IsMember({"auto", "csv", "jsonl"}))
            ->capture_default_str();
    }

    int run() {
        auto spec = load_spec(spec_file, scenario);
        if (seed) spec.seed = *seed;
        if (cases) spec.total_cases = *cases;
        driftgen::GeneratedLog log;
        try {
            log = driftgen::generate(spec);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        const Format f = format == "auto" ? format_for_path(out) : parse_format(format);
        driftgen::to_stream_file(log, out, f);
        std::cout << "events=" << log.events.size() << " cases=" << spec.total_cases << " kind=" << to_string(spec.kind)
                  << " out=" << out << " annotations=" << driftgen::annotations_path(out) << '\n';
        return kOk;
    }
};

// ----------------------------------------------------------------------------
// bench
// ----------------------------------------------------------------------------

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t v = 0;
        const auto t = trim(item);
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc{} || ptr != t.data() + t.size() || v == 0)
            throw UsageError("--sizes must be a comma-separated list of positive integers");
        out.push_back(v);
    }
    if (out.empty()) throw UsageError("--sizes is empty");
    return out;
}

struct BenchCmd {
    std::string scenario;
    std::string spec_file;
    std::string input;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    StrategyFlags strategy;
    bool compare = false;
    bool latency = false;
    bool throughput = false;
    std::string sizes = "50,100,150,200,250,300,350,400,450,500";
    std::size_t trials = 200;
    std::size_t runs = 5;
    std::size_t throughput_events = 100'000;
    std::size_t count = 20;
    std::string landmark = "A";
    Timestamp tv_timeout = 500;

    void add(CLI::App& app) {
        app.add_option("--scenario", scenario, "Built-in drift scenario: sudden, gradual, recurring, incremental");
        app.add_option("--spec", spec_file, "Drift specification JSON file");
        app.add_option("--input", input, "Existing event file instead of a generated log");
        app.add_option("--seed", seed, "Override the seed of the specification");
        app.add_option("--out-dir", out_dir, "Directory for the CSV outputs")->capture_default_str();
        strategy.add(app);
        app.add_flag("--compare", compare, "Compare adaptive windows under every view with count and landmark windows");
        app.add_option("--compare-count", count, "Window size of the count-tumbling baseline")->capture_default_str();
        app.add_option("--compare-landmark", landmark, "Landmark activity of the landmark baseline")
            ->capture_default_str();
        app.add_option("--compare-tv-timeout", tv_timeout, "Case timeout (ms) of the trace-variant view in comparisons")
            ->capture_default_str();
        app.add_flag("--latency", latency, "Measure window latency per window size");
        app.add_option("--sizes", sizes, "Window sizes for --latency")->capture_default_str();
        app.add_option("--trials", trials, "Trials per window size for --latency")->capture_default_str();
        app.add_flag("--throughput", throughput, "Measure replay throughput");
        app.add_option("--runs", runs, "Runs for --throughput")->capture_default_str();
        app.add_option("--throughput-events", throughput_events, "Synthetic stream length for --throughput")
            ->capture_default_str();
    }

    fs::path out(const char* name) const { return fs::path(out_dir) / name; }

    int run() {
        const bool generated = !scenario.empty() || !spec_file.empty();
        if (generated && !input.empty()) throw UsageError("use either --input or --scenario/--spec");
        const bool needs_log = generated || !input.empty();
        if (!needs_log && !latency && !throughput)
            throw UsageError("nothing to do: give --scenario, --spec or --input, or --latency/--throughput");
        if (trials == 0 || runs == 0) throw UsageError("--trials and --runs must be positive");
        std::vector<std::size_t> latency_sizes;
        if (latency) latency_sizes = parse_sizes(sizes);
        Pipeline probe = strategy.make(); // validates flags before any work
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw std::runtime_error("cannot create '" + out_dir + "': " + ec.message());

        if (needs_log) run_log(generated);
        if (latency) run_latency(latency_sizes);
        if (throughput) run_throughput();
        (void)probe;
        return kOk;
    }

    void run_log(bool generated) {
        std::vector<Event> events;
        std::optional<driftgen::DriftSpec> spec;
        std::optional<driftgen::Annotations> ann;
        if (generated) {
            spec = load_spec(spec_file, scenario);
            if (seed) spec->seed = *seed;
            auto log = driftgen::generate(*spec);
            events = std::move(log.events);
            ann = std::move(log.annotations);
        } else {
            events = read_events(input);
            std::ifstream side(driftgen::annotations_path(input));
            if (side) ann = driftgen::annotations_from_json(nlohmann::json::parse(side));
        }

        Pipeline p = strategy.make();
        const auto records = bench::run_pipeline(events, p);
        write_table(bench::window_sizes_table(records), out("window_sizes.csv").string());
        const auto closed = bench::closed_sizes(records);
        std::cout << p.label() << ": events=" << events.size() << " windows=" << records.size()
                  << " mean_closed_size=" << fmt(bench::mean(closed)) << '\n';

        if (ann) {
            const auto kind = spec ? spec->kind : driftgen::DriftKind::sudden;
            const auto reports = bench::drift_reports(records, kind, ann->drift_case_indices);
            write_table(bench::drift_report_table(reports), out("drift_report.csv").string());
            for (const auto& r : reports)
                std::cout << "drift case=" << r.drift_case << " window=" << r.drift_window
                          << " pre_mean=" << fmt(r.report.pre_mean) << " during_mean=" << fmt(r.report.during_mean)
                          << " post_mean=" << fmt(r.report.post_mean)
                          << " mean_rel_change=" << fmt(r.report.mean_relative_change)
                          << " cv=" << fmt(r.report.coefficient_of_variation) << '\n';
            if (reports.empty()) std::cerr << "warning: no drift has enough surrounding windows for a report\n";
        }

        if (compare) {
            bench::ComparisonOptions opts;
            opts.adaptive = strategy.adaptive;
            opts.views = bench::ComparisonOptions::default_views();
            opts.views.back().case_timeout = tv_timeout;
            opts.count = count;
            opts.landmark_activity = landmark;
            if (count == 0 || landmark.empty()) throw UsageError("comparison needs a positive count and a landmark");
            std::vector<bench::StrategySummary> rows;
            if (spec && ann) rows = bench::compare_strategies(driftgen::GeneratedLog{events, *ann}, *spec, opts);
            else rows = bench::compare_strategies(events, opts);
            const auto table = bench::comparison_table(rows);
            write_table(table, out("comparison.csv").string());
            table.write_csv(std::cout);
        }
    }

    void run_latency(const std::vector<std::size_t>& ns) {
        bench::LatencyOptions opts;
        opts.trials = trials;
        opts.adaptive = strategy.adaptive;
        opts.view = strategy.view.config();
        if (seed) opts.seed = *seed;
        const auto rows = bench::measure_latency(ns, opts);
        write_table(bench::latency_table(rows), out("latency.csv").string());
        std::vector<double> x, y;
        for (const auto& r : rows) {
            x.push_back(static_cast<double>(r.n));
            y.push_back(r.median_us);
        }
        if (rows.size() >= 2) {
            const auto fit = bench::fit_linear(x, y);
            std::cout << "latency: slope_us_per_event=" << fmt(fit.slope) << " r2=" << fmt(fit.r2) << '\n';
        }
    }

    void run_throughput() {
        std::string path = input;
        if (path.empty()) {
            path = out("throughput_stream.jsonl").string();
            auto f = open_out(path);
            write_events(f, bench::synthetic_stream(throughput_events, seed.value_or(42)), Format::jsonl);
        }
        const auto rep = bench::measure_throughput(path, [&] { return strategy.make(); }, runs);
        write_table(bench::throughput_table(rep), out("throughput.csv").string());
        std::cout << "throughput: events=" << rep.events << " events_per_sec=" << fmt(rep.mean) << " +- "
                  << fmt(rep.std) << " over " << runs << " runs\n";
    }
};

// ----------------------------------------------------------------------------
// listen
// ----------------------------------------------------------------------------

struct ListenCmd {
    std::string host = "127.0.0.1";
    long port = 7070;
    bool lenient = false;
    StrategyFlags strategy;
    WindowSinks sinks;

    void add(CLI::App& app) {
        app.add_option("--host", host, "Bind address (IPv4)")->capture_default_str();
        app.add_option("--port", port, "TCP port")->capture_default_str();
        app.add_flag("--lenient", lenient, "Drop out-of-order events instead of rejecting them");
        strategy.add(app);
        sinks.add(app);
    }

    int run() {
        Pipeline pipeline = strategy.make();
        if (port < 0 || port > 65535) throw std::runtime_error("cannot bind port " + std::to_string(port));
        sinks.open();

        // Signals are taken synchronously by a dedicated thread.
        sigset_t set;
        sigemptyset(&set);
        sigaddset(&set, SIGINT);
        sigaddset(&set, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &set, nullptr);

        TcpServer server({host, static_cast<std::uint16_t>(port), !lenient});
        server.start();
        std::cerr << "listening on " << host << ":" << server.port() << '\n';

        std::atomic<bool> done{false};
        std::thread waiter([&] {
            timespec tick{0, 100'000'000};
            while (!done.load()) {
                if (sigtimedwait(&set, nullptr, &tick) > 0) {
                    server.stop();
                    return;
                }
            }
        });

        std::size_t events = 0;
        server.run([&](const Event& e) {
            ++events;
            if (auto r = pipeline.process(e)) sinks.emit(*r);
        });
        done.store(true);
        waiter.join();
        if (auto r = pipeline.flush()) sinks.emit(*r);
        sinks.close();
        const auto c = server.counters();
        sinks.summary(events, c.dropped);
        std::cout << "connections=" << c.connections << " rejected=" << c.rejected << '\n';
        return kOk;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"covwin: coverage-driven adaptive windows over event streams"};
    app.set_config("--config", "", "Read options from a TOML/INI file; command-line flags take precedence");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    AnalyzeCmd analyze;
    EstimateCmd estimate;
    DriftgenCmd drift;
    BenchCmd bench_cmd;
    ListenCmd listen;

    auto* a = app.add_subcommand("analyze", "Window an event file and report the windows");
    analyze.add(*a);
    auto* e = app.add_subcommand("estimate", "Completeness and coverage of a whole event file");
    estimate.add(*e);
    auto* d = app.add_subcommand("driftgen", "Generate a synthetic log with drifts");
    drift.add(*d);
    auto* b = app.add_subcommand("bench", "Drift statistics, strategy comparison, latency and throughput");
    bench_cmd.add(*b);
    auto* l = app.add_subcommand("listen", "Window events received over TCP (one JSON event per line)");
    listen.add(*l);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (a->parsed()) return analyze.run();
        if (e->parsed()) return estimate.run();
        if (d->parsed()) return drift.run();
        if (b->parsed()) return bench_cmd.run();
        if (l->parsed()) return listen.run();
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kUsage;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kRuntime;
    }
    return kUsage;
}
