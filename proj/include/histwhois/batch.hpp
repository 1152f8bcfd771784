#pragma once

#include <chrono>
#include <istream>
#include <ostream>
#include <string>

#include "histwhois/whois_server.hpp"

namespace histwhois {

struct batch_stats {
    std::size_t lines = 0;
    std::size_t answered = 0;
    std::size_t errors = 0;
    double seconds = 0;

    double rate() const { return seconds > 0 ? double(lines) / seconds : 0.0; }
};

/// Offline twin of a bulk session: one output line per query line, in order,
/// byte-identical to what the server sends between `begin` and `end`.
/// `begin`/`end` lines in the input are ignored.
inline batch_stats query_stream(const lookup_engine& engine, std::istream& in, std::ostream& out,
                                output_format format = output_format::json_short) {
    // Non-owning alias: the session only borrows the engine for this call.
    engine_holder holder(std::shared_ptr<const lookup_engine>(&engine, [](const lookup_engine*) {}));
    server_config cfg;
    cfg.format = format;
    cfg.max_bulk_lines = static_cast<std::size_t>(-1);
    whois_session session(holder, cfg);
    session.handle_line("begin");

    batch_stats stats;
    const auto start = std::chrono::steady_clock::now();
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const auto t = detail::trim(line);
        if (detail::iequals(t, "begin") || detail::iequals(t, "end"))
            continue;
        ++stats.lines;
        const auto r = session.handle_line(line);
        if (r.text.starts_with("# ERROR"))
            ++stats.errors;
        else if (!r.text.empty())
            ++stats.answered;
        out << r.text;
    }
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return stats;
}

} // namespace histwhois
