#pragma once

#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <condition_variable>
#include <cstdint>
#include <iostream>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "histwhois/json_output.hpp"
#include "histwhois/lookup.hpp"

namespace histwhois {

struct server_config {
    std::string bind_address = "0.0.0.0";
    std::uint16_t port = 4343;
    std::string contact = "<noc@localhost>";
    std::size_t max_line_length = 4096;
    std::size_t max_bulk_lines = 100000;
    int idle_timeout_seconds = 300;
    output_format format = output_format::json_short;
};

/// Current engine, swappable while connections are being served. Readers take a
/// shared reference per query and never see a partially replaced engine.
class engine_holder {
public:
    engine_holder() = default;
    explicit engine_holder(std::shared_ptr<const lookup_engine> e) : engine_(std::move(e)) {}

    std::shared_ptr<const lookup_engine> get() const {
        std::lock_guard lock(mutex_);
        return engine_;
    }

    void set(std::shared_ptr<const lookup_engine> e) {
        std::lock_guard lock(mutex_);
        engine_ = std::move(e);
    }

private:
    mutable std::mutex mutex_;
    std::shared_ptr<const lookup_engine> engine_;
};

namespace detail {

inline bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

/// Printable ASCII only, for echoing client input in comment lines.
inline std::string sanitize(std::string_view s, std::size_t max = 80) {
    std::string out;
    for (char c : s.substr(0, max))
        out += (c >= 0x20 && c < 0x7f) ? c : '?';
    if (s.size() > max)
        out += "...";
    return out;
}

} // namespace detail

inline std::string banner(const lookup_engine* engine, const server_config& cfg) {
    std::string out = "# This is the historic IP to AS mapping service\n";
    out += "# Contact: " + cfg.contact + "\n";
    if (engine) {
        out += "# Trie Status: READY - loaded " + std::to_string(engine->prefix_count(ip_family::v4)) + " IPv4 and " +
               std::to_string(engine->prefix_count(ip_family::v6)) + " IPv6 prefixes\n";
        out += "# AS2Org Status: " + std::to_string(engine->timeline().as_count()) + " AS and " +
               std::to_string(engine->timeline().org_count()) + " organisations loaded\n";
    } else {
        out += "# Trie Status: LOADING - no prefixes available yet\n";
        out += "# AS2Org Status: LOADING\n";
    }
    out += "# Enter HELP to get basic usage information\n";
    out += cfg.format == output_format::json_short ? "# NOTICE: OUTPUT FORMAT: JSON-SHORT\n"
                                                   : "# NOTICE: OUTPUT FORMAT: JSON-VERBOSE\n";
    out += engine ? "# READY\n" : "# NOT READY - data is still loading\n";
    return out;
}

inline std::string help_text() {
    return "# Usage:\n"
           "#   <ip-or-prefix> [YYYYMMDD]\n"
           "#     Look up the most specific announced prefix covering the address on\n"
           "#     the given day. Without a date the newest imported day is used.\n"
           "#   begin\n"
           "#     Start bulk mode: one query per line, one JSON object per line.\n"
           "#   end\n"
           "#     Finish bulk mode and close the connection.\n"
           "#   HELP\n"
           "#     Show this text.\n"
           "# Results: IP and QDATE echo the request; results is [] when nothing\n"
           "# covered the address on that day. DATA_FIRST/DATA_LAST bound the period\n"
           "# the prefix was seen with this origin set (DATA_LAST null: still seen).\n";
}

/// Protocol state machine for one connection, independent of the socket.
class whois_session {
public:
    enum class mode { interactive, bulk };

    struct response {
        std::string text;
        bool close = false;
    };

    whois_session(const engine_holder& engines, const server_config& cfg) : engines_(engines), cfg_(cfg) {}

    mode current_mode() const { return mode_; }
    std::size_t lines_processed() const { return lines_processed_; }

    /// Handles one request line (without its line terminator).
    response handle_line(std::string_view raw) {
        ++lines_processed_;
        const auto line = detail::trim(raw);
        if (line.empty())
            return {};
        if (detail::iequals(line, "help"))
            return {help_text()};
        if (detail::iequals(line, "begin")) {
            if (mode_ == mode::bulk)
                return {"# ERROR: already in bulk mode\n"};
            mode_ = mode::bulk;
            bulk_lines_ = 0;
            return {};
        }
        if (detail::iequals(line, "end")) {
            if (mode_ != mode::bulk)
                return {"# ERROR: 'end' without 'begin'\n"};
            mode_ = mode::interactive;
            return {"# goodbye\n", true};
        }
        if (mode_ == mode::bulk && ++bulk_lines_ > cfg_.max_bulk_lines)
            return {"# ERROR: bulk batch limit of " + std::to_string(cfg_.max_bulk_lines) +
                        " lines exceeded\n# goodbye\n",
                    true};
        return {answer(line)};
    }

    /// Response for a line that exceeded the configured length limit.
    response line_too_long() {
        ++lines_processed_;
        return {"# ERROR: line exceeds " + std::to_string(cfg_.max_line_length) + " bytes\n"};
    }

private:
    std::string answer(std::string_view line) {
        const auto engine = engines_.get();
        if (!engine)
            return "# ERROR: data is still loading, please retry later\n";

        std::vector<std::string_view> tokens;
        std::size_t pos = 0;
        while (pos < line.size()) {
            while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos])))
                ++pos;
            const auto start = pos;
            while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos])))
                ++pos;
            if (pos > start)
                tokens.push_back(line.substr(start, pos - start));
        }
        if (tokens.size() > 2)
            return "# ERROR: expected '<ip-or-prefix> [YYYYMMDD]', got '" + detail::sanitize(line) + "'\n";
        try {
            day date;
            if (tokens.size() == 2) {
                date = day::parse_or_throw(tokens[1]);
            } else if (auto newest = engine->newest_date()) {
                date = *newest;
            } else {
                return "# ERROR: no data loaded\n";
            }
            auto q = lookup_query::parse(tokens[0], date.str());
            const auto result = engine->lookup(q);
            const auto json = to_json(result, cfg_.format);
            return (mode_ == mode::bulk ? dump_compact(json) : dump_pretty(json)) + "\n";
        } catch (const std::invalid_argument& e) {
            return "# ERROR: " + detail::sanitize(e.what(), 200) + "\n";
        }
    }

    const engine_holder& engines_;
    const server_config& cfg_;
    mode mode_ = mode::interactive;
    std::size_t lines_processed_ = 0;
    std::size_t bulk_lines_ = 0;
};

/// Multi-connection TCP line server. One thread per connection; every
/// connection reads the engine through the shared holder.
class whois_server {
public:
    whois_server(engine_holder& engines, server_config cfg, std::ostream& log = std::cerr)
        : engines_(engines), cfg_(std::move(cfg)), log_(log) {}

    whois_server(const whois_server&) = delete;
    whois_server& operator=(const whois_server&) = delete;

    ~whois_server() { stop(); }

    /// Binds and starts accepting in a background thread. Returns the bound port.
    std::uint16_t start() {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        hints.ai_flags = AI_PASSIVE | AI_NUMERICHOST | AI_NUMERICSERV;
        addrinfo* res = nullptr;
        const auto port_text = std::to_string(cfg_.port);
        if (int rc = getaddrinfo(cfg_.bind_address.c_str(), port_text.c_str(), &hints, &res); rc != 0)
            throw std::runtime_error("cannot resolve listen address " + cfg_.bind_address + ": " + gai_strerror(rc));
        std::unique_ptr<addrinfo, decltype(&freeaddrinfo)> guard(res, freeaddrinfo);

        listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
        if (listen_fd_ < 0)
            throw std::runtime_error("socket() failed");
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (res->ai_family == AF_INET6) {
            int zero = 0;
            ::setsockopt(listen_fd_, IPPROTO_IPV6, IPV6_V6ONLY, &zero, sizeof zero);
        }
        if (::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 128) != 0) {
            ::close(listen_fd_);
            listen_fd_ = -1;
            throw std::runtime_error("cannot listen on " + cfg_.bind_address + ":" + port_text);
        }
        sockaddr_storage bound{};
        socklen_t len = sizeof bound;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
        port_ = ntohs(bound.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port
                                                  : reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
        running_ = true;
        acceptor_ = std::thread([this] { accept_loop(); });
        return port_;
    }

    std::uint16_t port() const { return port_; }

    void stop() {
        if (!running_.exchange(false))
            return;
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        if (acceptor_.joinable())
            acceptor_.join();
        std::unique_lock lock(mutex_);
        for (int fd : open_fds_)
            ::shutdown(fd, SHUT_RDWR);
        idle_.wait(lock, [this] { return active_ == 0; });
    }

    /// Blocks until stop() is called from another thread.
    void wait() {
        std::unique_lock lock(mutex_);
        stopped_.wait(lock, [this] { return !running_; });
    }

private:
    void accept_loop() {
        while (running_) {
            pollfd p{listen_fd_, POLLIN, 0};
            if (::poll(&p, 1, 200) <= 0)
                continue;
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0)
                continue;
            {
                std::lock_guard lock(mutex_);
                ++active_;
                open_fds_.push_back(fd);
            }
            std::thread([this, fd] {
                try {
                    serve_connection(fd);
                } catch (const std::exception& e) {
                    log_ << "connection error: " << e.what() << "\n";
                }
                ::close(fd);
                std::lock_guard lock(mutex_);
                open_fds_.erase(std::find(open_fds_.begin(), open_fds_.end(), fd));
                --active_;
                idle_.notify_all();
            }).detach();
        }
        std::lock_guard lock(mutex_);
        stopped_.notify_all();
    }

    static bool send_all(int fd, std::string_view data) {
        while (!data.empty()) {
            const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
            if (n <= 0)
                return false;
            data.remove_prefix(static_cast<std::size_t>(n));
        }
        return true;
    }

    /// Reads until the peer closes (bounded), so closing never resets unsent data.
    static void drain(int fd) {
        char sink[4096];
        for (int i = 0; i < 50; ++i) {
            pollfd p{fd, POLLIN, 0};
            if (::poll(&p, 1, 100) <= 0)
                continue;
            if (::recv(fd, sink, sizeof sink, 0) <= 0)
                return;
        }
    }

    void serve_connection(int fd) {
        whois_session session(engines_, cfg_);
        if (!send_all(fd, banner(engines_.get().get(), cfg_)))
            return;
        std::string buffer;
        bool discarding = false;
        char chunk[16384];
        for (;;) {
            pollfd p{fd, POLLIN, 0};
            const int ready = ::poll(&p, 1, cfg_.idle_timeout_seconds * 1000);
            if (ready == 0) {
                send_all(fd, "# ERROR: idle timeout\n");
                return;
            }
            if (ready < 0)
                return;
            const auto n = ::recv(fd, chunk, sizeof chunk, 0);
            if (n <= 0)
                return;
            std::string_view in(chunk, static_cast<std::size_t>(n));
            std::string out;
            while (!in.empty()) {
                const auto nl = in.find('\n');
                if (nl == std::string_view::npos) {
                    if (!discarding)
                        buffer.append(in);
                    in = {};
                    if (buffer.size() > cfg_.max_line_length) {
                        out += session.line_too_long().text;
                        buffer.clear();
                        discarding = true;
                    }
                    break;
                }
                if (discarding) {
                    discarding = false;
                    in.remove_prefix(nl + 1);
                    continue;
                }
                buffer.append(in.substr(0, nl));
                in.remove_prefix(nl + 1);
                if (!buffer.empty() && buffer.back() == '\r')
                    buffer.pop_back();
                whois_session::response r;
                if (buffer.size() > cfg_.max_line_length)
                    r = session.line_too_long();
                else
                    r = session.handle_line(buffer);
                buffer.clear();
                out += r.text;
                if (r.close) {
                    send_all(fd, out);
                    ::shutdown(fd, SHUT_WR);
                    drain(fd);
                    return;
                }
            }
            if (!out.empty() && !send_all(fd, out))
                return;
        }
    }

    engine_holder& engines_;
    server_config cfg_;
    std::ostream& log_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex mutex_;
    std::condition_variable idle_;
    std::condition_variable stopped_;
    std::vector<int> open_fds_;
    int active_ = 0;
};

} // namespace histwhois
