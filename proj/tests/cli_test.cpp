#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;

namespace {

const std::string kCli = COVWIN_CLI_PATH;
const std::string kData = COVWIN_TEST_DATA_DIR;

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("covwin_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Runs the CLI with `args` and captures both output streams.
Result run(const std::string& args) {
    const auto out = scratch() / "stdout.txt";
    const auto err = scratch() / "stderr.txt";
    const std::string cmd = kCli + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

std::string hundred_events() {
    const auto p = scratch() / "hundred.jsonl";
    std::string text;
    for (int i = 0; i < 100; ++i)
        text += R"({"case":"c)" + std::to_string(i % 7) + R"(","activity":"a)" + std::to_string(i % 4) +
                R"(","timestamp":)" + std::to_string(i) + "}\n";
    spit(p, text);
    return p.string();
}

const std::string kWorked = kData + "/worked_example.csv";

} // namespace

TEST(Cli, EstimateWorkedExample) {
    const auto r = run("estimate " + kWorked);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "chao1=6 ")) << r.out;
    EXPECT_TRUE(contains(r.out, "completeness=0.8333333333333334")) << r.out;
    EXPECT_TRUE(contains(r.out, "coverage=0.8222222222222222")) << r.out;
}

TEST(Cli, EstimateDirectlyFollowsCountsSevenSpecies) {
    const auto r = run("estimate --view df " + kWorked);
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(contains(r.out, "species=7 ")) << r.out;
}

TEST(Cli, EstimateEmptyFileIsZero) {
    const auto p = scratch() / "empty.jsonl";
    spit(p, "");
    const auto r = run("estimate " + p.string());
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(contains(r.out, "chao1=0 completeness=0 coverage=0")) << r.out;
}

TEST(Cli, AnalyzeEstimateOnly) {
    const auto r = run("analyze --estimate-only " + kWorked);
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(contains(r.out, "chao1=6 completeness=0.8333333333333334 coverage=0.8222222222222222")) << r.out;
}

TEST(Cli, AnalyzeMissingFileExitsOne) {
    const auto r = run("analyze /nonexistent/events.jsonl");
    EXPECT_EQ(r.code, 1);
    EXPECT_TRUE(contains(r.err, "cannot open")) << r.err;
}

TEST(Cli, AnalyzeCountStrategy) {
    const auto r = run("analyze --strategy count --count 20 " + hundred_events());
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "windows=5 mean_size=20 min_size=20 max_size=20")) << r.out;
}

TEST(Cli, AnalyzeWritesSinks) {
    const auto w = scratch() / "windows.jsonl";
    const auto s = scratch() / "sizes.csv";
    const auto r = run("analyze -q --windows-out " + w.string() + " --sizes-out " + s.string() + " " + hundred_events());
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(contains(r.out, "window 0")) << r.out;
    const auto sizes = slurp(s);
    EXPECT_EQ(sizes.rfind("index,size,first_ts,last_ts,coverage,threshold\n", 0), 0u);
    const auto lines = std::count(sizes.begin(), sizes.end(), '\n');
    const auto records = slurp(w);
    EXPECT_EQ(std::count(records.begin(), records.end(), '\n'), lines - 1);
}

TEST(Cli, VerboseLogsJsonPerWindow) {
    const auto r = run("analyze -q -v --strategy count --count 50 " + hundred_events());
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 2);
    EXPECT_EQ(r.err.rfind(R"({"event":"window_closed","index":0,"size":50)", 0), 0u) << r.err;
}

TEST(Cli, InvalidParametersExitTwo) {
    EXPECT_EQ(run("analyze --min-window-size 0 " + kWorked).code, 2);
    EXPECT_EQ(run("analyze --strategy sliding " + kWorked).code, 2);
    EXPECT_EQ(run("analyze --initial-threshold 0.3 " + kWorked).code, 2);
    EXPECT_EQ(run("analyze --strategy landmark " + kWorked).code, 2);
    EXPECT_EQ(run("analyze --speed fast " + kWorked).code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("").code, 2);
}

TEST(Cli, ParseErrorExitsOne) {
    const auto p = scratch() / "broken.jsonl";
    spit(p, "{\"case\":\"c\",\"activity\":\"A\",\"timestamp\":1}\n{\"case\":\"c\",\"timestamp\":5}\n");
    const auto r = run("analyze " + p.string());
    EXPECT_EQ(r.code, 1);
    EXPECT_TRUE(contains(r.err, "line 2")) << r.err;
    EXPECT_TRUE(contains(r.err, "missing_activity")) << r.err;
}

TEST(Cli, LenientDropsRegressions) {
    const auto p = scratch() / "regress.jsonl";
    spit(p, "{\"case\":\"c\",\"activity\":\"A\",\"timestamp\":5}\n{\"case\":\"c\",\"activity\":\"B\",\"timestamp\":4}\n"
            "{\"case\":\"c\",\"activity\":\"C\",\"timestamp\":6}\n");
    EXPECT_EQ(run("analyze " + p.string()).code, 1);
    const auto r = run("analyze --lenient " + p.string());
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(contains(r.out, "events=2 dropped=1")) << r.out;
}

TEST(Cli, HelpShowsDefaults) {
    const auto r = run("analyze --help");
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(contains(r.out, "--initial-smoothing FLOAT [0.2]")) << r.out;
    EXPECT_TRUE(contains(r.out, "--decay-rate FLOAT [0.1]")) << r.out;
    EXPECT_TRUE(contains(r.out, "--min-window-size UINT [5]")) << r.out;
}

TEST(Cli, ConfigFileWithFlagOverride) {
    const auto cfg = scratch() / "run.toml";
    spit(cfg, "[analyze]\nstrategy = \"count\"\ncount = 20\nquiet = true\n");
    const auto events = hundred_events();
    auto r = run("--config " + cfg.string() + " analyze " + events);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "windows=5 ")) << r.out;
    EXPECT_FALSE(contains(r.out, "window 0")) << r.out;
    r = run("--config " + cfg.string() + " analyze --count 50 " + events);
    EXPECT_TRUE(contains(r.out, "windows=2 ")) << r.out;
    EXPECT_EQ(run("--config /nonexistent.toml analyze " + events).code, 2);
}

TEST(Cli, DriftgenIsByteIdenticalOnRerun) {
    const auto a = scratch() / "gen_a.jsonl";
    const auto b = scratch() / "gen_b.jsonl";
    ASSERT_EQ(run("driftgen --scenario gradual --cases 300 --out " + a.string()).code, 0);
    ASSERT_EQ(run("driftgen --scenario gradual --cases 300 --out " + b.string()).code, 0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_EQ(slurp(a.string() + ".annotations.json"), slurp(b.string() + ".annotations.json"));
    EXPECT_FALSE(slurp(a).empty());
    ASSERT_EQ(run("driftgen --scenario gradual --cases 300 --seed 9 --out " + b.string()).code, 0);
    EXPECT_NE(slurp(a), slurp(b));
}

TEST(Cli, DriftgenFromSpecFile) {
    const auto spec = scratch() / "spec.json";
    spit(spec, R"({"kind":"sudden","total_cases":20,"drift_position":0.5,
                   "pools":[{"variants":[["A","B"]]},{"variants":[["A","C","D"]]}]})");
    const auto out = scratch() / "spec_out.csv";
    const auto r = run("driftgen --spec " + spec.string() + " --out " + out.string());
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "events=50 ")) << r.out;
    EXPECT_EQ(slurp(out).rfind("case_id,activity,timestamp\n", 0), 0u);
}

TEST(Cli, DriftgenBadSpecExitsTwo) {
    const auto spec = scratch() / "bad_spec.json";
    spit(spec, R"({"kind":"sudden","pools":[{"variants":[["A"]]}]})");
    const auto out = (scratch() / "never.jsonl").string();
    EXPECT_EQ(run("driftgen --spec " + spec.string() + " --out " + out).code, 2);
    spit(spec, "not json");
    EXPECT_EQ(run("driftgen --spec " + spec.string() + " --out " + out).code, 2);
    EXPECT_EQ(run("driftgen --scenario seasonal --out " + out).code, 2);
    EXPECT_EQ(run("driftgen --out " + out).code, 2);
}

TEST(Cli, BenchScenarioWritesReports) {
    const auto dir = scratch() / "bench_sudden";
    const auto r = run("bench --scenario sudden --compare --out-dir " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = slurp(dir / "drift_report.csv");
    EXPECT_EQ(report.rfind("drift_case,drift_window,before,after,", 0), 0u) << report;
    EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 2);
    const auto cmp = slurp(dir / "comparison.csv");
    for (const char* label : {"adaptive-act1", "adaptive-df", "adaptive-tv", "count20", "landmark"})
        EXPECT_TRUE(contains(cmp, std::string("\n") + label + ",")) << label;
    EXPECT_TRUE(contains(r.out, "strategy,windows,mean_size")) << r.out;
    EXPECT_TRUE(fs::exists(dir / "window_sizes.csv"));
}

TEST(Cli, BenchOnInputFileUsesWholeLogReference) {
    const auto dir = scratch() / "bench_input";
    const auto r = run("bench --input " + hundred_events() + " --compare --compare-landmark a0 --out-dir " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "comparison.csv"));
    EXPECT_FALSE(fs::exists(dir / "drift_report.csv"));
}

TEST(Cli, BenchLatencySizesAreMonotone) {
    const auto dir = scratch() / "bench_latency";
    const auto r = run("bench --latency --sizes 10,20,40 --trials 3 --out-dir " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(slurp(dir / "latency.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "n,median_us,p95_us");
    std::vector<int> ns;
    while (std::getline(in, line)) ns.push_back(std::stoi(line.substr(0, line.find(','))));
    EXPECT_EQ(ns, (std::vector<int>{10, 20, 40}));
    EXPECT_EQ(run("bench --latency --sizes 10,x --out-dir " + dir.string()).code, 2);
    EXPECT_EQ(run("bench --out-dir " + dir.string()).code, 2);
}

TEST(Cli, BenchThroughput) {
    const auto dir = scratch() / "bench_tp";
    const auto r = run("bench --throughput --throughput-events 5000 --runs 5 --out-dir " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(dir / "throughput.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
    EXPECT_TRUE(contains(r.out, "events=5000 ")) << r.out;
}

TEST(Cli, ListenBadPortExitsOne) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = 0;
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
    ASSERT_EQ(::listen(fd, 1), 0);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    const auto busy = std::to_string(ntohs(addr.sin_port));
    EXPECT_EQ(run("listen --port " + busy).code, 1);
    EXPECT_EQ(run("listen --port 70000").code, 1);
    ::close(fd);
}

TEST(Cli, ListenProcessesEventsAndFlushesOnSignal) {
    const auto out = scratch() / "listen_out.txt";
    const auto err = scratch() / "listen_err.txt";
    const pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
        const int o = ::open(out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        const int e = ::open(err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        ::dup2(o, 1);
        ::dup2(e, 2);
        ::execl(kCli.c_str(), kCli.c_str(), "listen", "--port", "0", "--strategy", "count", "--count", "2",
                static_cast<char*>(nullptr));
        ::_exit(127);
    }

    int port = 0;
    const std::regex re("listening on 127\\.0\\.0\\.1:(\\d+)");
    for (int i = 0; i < 200 && port == 0; ++i) {
        std::smatch m;
        const auto text = slurp(err);
        if (std::regex_search(text, m, re)) port = std::stoi(m[1]);
        else std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ASSERT_NE(port, 0) << slurp(err);

    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    ASSERT_EQ(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
    const std::string lines = R"({"case":"c","activity":"A","timestamp":1}
{"case":"c","activity":"B","timestamp":2}
{"case":"c","activity":"C","timestamp":3}
)";
    ASSERT_EQ(::send(fd, lines.data(), lines.size(), 0), static_cast<ssize_t>(lines.size()));
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    ::kill(pid, SIGTERM);
    int status = 0;
    ::waitpid(pid, &status, 0);
    ::close(fd);

    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 0) << slurp(err);
    const auto text = slurp(out);
    EXPECT_TRUE(contains(text, "window 0 size=2")) << text;
    EXPECT_TRUE(contains(text, "window 1 size=1 coverage=0 threshold=0 forced")) << text;
    EXPECT_TRUE(contains(text, "events=3 dropped=0 windows=2")) << text;
}
