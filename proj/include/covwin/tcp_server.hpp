#pragma once

#include "covwin/event.hpp"
#include "covwin/replay.hpp"
#include "covwin/wire_format.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

namespace covwin {

// ----------------------------------------------------------------------------
// TcpServer
//
// Line protocol: one JSON event per '\n'-terminated line, any number of
// concurrent connections. Each line is parsed on its connection thread and
// then passes the ordering gate and enters the pipeline queue under a single
// lock, so queue order is arrival order and ordering is judged in that
// order. Rejected lines get a one-line "ERR <code> <message>" reply; the
// connection stays open. run() consumes the queue on the calling thread.
// ----------------------------------------------------------------------------
class TcpServer {
public:
    struct Options {
        std::string host = "127.0.0.1";
        std::uint16_t port = 0;
        bool strict_order = true;
    };

    struct Counters {
        std::size_t accepted = 0;
        std::size_t rejected = 0;
        std::size_t dropped = 0;
        std::size_t connections = 0;
    };

    explicit TcpServer(Options opts) : opts_(std::move(opts)), gate_(opts_.strict_order) {}

    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    ~TcpServer() {
        stop();
        join_all();
        if (listen_fd_ >= 0) ::close(listen_fd_);
    }

    /// Binds and starts accepting. Throws std::system_error on failure.
    void start() {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(opts_.port);
        if (::inet_pton(AF_INET, opts_.host.c_str(), &addr.sin_addr) != 1)
            throw std::system_error(EINVAL, std::generic_category(), "bad bind address '" + opts_.host + "'");
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
            throw std::system_error(errno, std::generic_category(), "bind " + opts_.host + ":" + std::to_string(opts_.port));
        if (::listen(listen_fd_, 64) < 0) throw std::system_error(errno, std::generic_category(), "listen");

        socklen_t len = sizeof addr;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    std::uint16_t port() const noexcept { return port_; }

    /// Delivers queued events to `sink` until stop() is called, then drains
    /// what is left and returns.
    void run(const std::function<void(const Event&)>& sink) {
        for (;;) {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return !queue_.empty() || stopping_; });
            if (queue_.empty() && stopping_) break;
            Event e = std::move(queue_.front());
            queue_.pop_front();
            lock.unlock();
            sink(e);
        }
        join_all();
        std::lock_guard lock(mu_);
        while (!queue_.empty()) {
            sink(queue_.front());
            queue_.pop_front();
        }
    }

    /// Thread-safe. Connections are closed after at most one poll interval.
    void stop() {
        {
            std::lock_guard lock(mu_);
            stopping_ = true;
        }
        stop_flag_.store(true);
        cv_.notify_all();
    }

    Counters counters() const {
        std::lock_guard lock(mu_);
        return counters_;
    }

private:
    static constexpr int kPollMs = 50;

    void accept_loop() {
        while (!stop_flag_.load()) {
            pollfd pfd{listen_fd_, POLLIN, 0};
            if (::poll(&pfd, 1, kPollMs) <= 0) continue;
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) continue;
            std::lock_guard lock(mu_);
            ++counters_.connections;
            conn_threads_.emplace_back([this, fd] { connection_loop(fd); });
        }
    }

    void connection_loop(int fd) {
        std::string pending;
        std::size_t line_no = 0;
        char buf[4096];
        while (!stop_flag_.load()) {
            pollfd pfd{fd, POLLIN, 0};
            const int ready = ::poll(&pfd, 1, kPollMs);
            if (ready == 0) continue;
            if (ready < 0) break;
            const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
            if (n <= 0) break;
            pending.append(buf, static_cast<std::size_t>(n));
            std::size_t pos;
            while ((pos = pending.find('\n')) != std::string::npos) {
                std::string line = pending.substr(0, pos);
                pending.erase(0, pos + 1);
                ++line_no;
                if (trim(line).empty()) continue;
                if (auto reply = handle_line(line, line_no); !reply.empty()) send_all(fd, reply);
            }
        }
        ::close(fd);
    }

    /// Returns the error reply, empty when the line was accepted or dropped.
    std::string handle_line(const std::string& line, std::size_t line_no) {
        auto parsed = parse_event(line, Format::jsonl, line_no);
        if (auto* err = std::get_if<ParseError>(&parsed)) {
            std::lock_guard lock(mu_);
            ++counters_.rejected;
            return "ERR " + std::string(to_string(err->code)) + " " + err->describe() + "\n";
        }
        Event& e = std::get<Event>(parsed);
        std::lock_guard lock(mu_);
        switch (gate_.admit(e)) {
        case OrderGate::Verdict::violation:
            ++counters_.rejected;
            return "ERR out_of_order line " + std::to_string(line_no) + ": timestamp " + std::to_string(e.timestamp) +
                   " precedes " + std::to_string(*gate_.last()) + "\n";
        case OrderGate::Verdict::drop:
            ++counters_.dropped;
            return {};
        case OrderGate::Verdict::accept:
            break;
        }
        ++counters_.accepted;
        queue_.push_back(std::move(e));
        cv_.notify_one();
        return {};
    }

    static void send_all(int fd, const std::string& data) {
        std::size_t off = 0;
        while (off < data.size()) {
            const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
            if (n <= 0) return;
            off += static_cast<std::size_t>(n);
        }
    }

    void join_all() {
        if (accept_thread_.joinable()) accept_thread_.join();
        std::vector<std::thread> threads;
        {
            std::lock_guard lock(mu_);
            threads.swap(conn_threads_);
        }
        for (auto& t : threads) t.join();
    }

    Options opts_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stop_flag_{false};
    std::thread accept_thread_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Event> queue_;
    bool stopping_ = false;
    OrderGate gate_;
    Counters counters_;
    std::vector<std::thread> conn_threads_;
};

} // namespace covwin
