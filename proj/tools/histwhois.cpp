// histwhois: build, serve, and query historic IP-to-AS attribution snapshots.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "histwhois/batch.hpp"
#include "histwhois/build.hpp"
#include "histwhois/eval.hpp"
#include "histwhois/snapshot.hpp"
#include "histwhois/whois_server.hpp"

namespace {

using namespace histwhois;

constexpr int exit_ok = 0;
constexpr int exit_input_error = 1;
constexpr int exit_build_error = 2;

std::atomic<bool> g_reload{false};
std::atomic<bool> g_stop{false};

extern "C" void on_signal(int sig) {
    if (sig == SIGHUP)
        g_reload = true;
    else
        g_stop = true;
}

std::optional<day> optional_date(const std::string& s) {
    if (s.empty())
        return std::nullopt;
    return day::parse_or_throw(s);
}

output_format parse_format(const std::string& s) {
    if (s == "short" || s == "json-short")
        return output_format::json_short;
    if (s == "verbose" || s == "json-verbose")
        return output_format::json_verbose;
    throw input_error("unknown output format '" + s + "'");
}

std::string slurp(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw input_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text))
        throw input_error("cannot write " + path);
}

struct build_options {
    std::string v4_dir, v6_dir, as2org_dir, from, to, out, report;
    unsigned v4_min = 8, v4_max = 24, v6_min = 18, v6_max = 48;
    bool no_reserved = false;
};

int run_build(const build_options& o) {
    build_config cfg;
    if (!o.v4_dir.empty())
        cfg.pfx2as_v4_dir = o.v4_dir;
    if (!o.v6_dir.empty())
        cfg.pfx2as_v6_dir = o.v6_dir;
    if (!o.as2org_dir.empty())
        cfg.as2org_dir = o.as2org_dir;
    cfg.from = optional_date(o.from);
    cfg.to = optional_date(o.to);
    cfg.policy.v4_min_len = o.v4_min;
    cfg.policy.v4_max_len = o.v4_max;
    cfg.policy.v6_min_len = o.v6_min;
    cfg.policy.v6_max_len = o.v6_max;
    cfg.seed_reserved = !o.no_reserved;

    auto built = build_engine(cfg);
    const auto bytes = serialize_snapshot(built.engine, built.metadata);
    save_snapshot(o.out, bytes);

    const auto report = built.report.to_json();
    if (!o.report.empty())
        write_text(o.report, report.dump(2) + "\n");
    std::cerr << "built " << o.out << ": " << built.engine.prefix_count(ip_family::v4) << " IPv4 / "
              << built.engine.prefix_count(ip_family::v6) << " IPv6 prefixes, "
              << built.engine.timeline().as_count() << " ASes, " << built.engine.timeline().org_count()
              << " orgs; " << report["totals"]["failed_files"].get<std::size_t>() << " files skipped; checksum "
              << std::hex << snapshot_checksum(bytes) << std::dec << "\n";
    return exit_ok;
}

struct serve_options {
    std::string snapshot, bind = "0.0.0.0", contact = "<noc@localhost>", format = "short";
    std::uint16_t port = 4343;
    std::size_t max_line = 4096, max_bulk = 100000;
    int idle_timeout = 300;
};

int run_serve(const serve_options& o) {
    server_config cfg;
    cfg.bind_address = o.bind;
    cfg.port = o.port;
    cfg.contact = o.contact;
    cfg.max_line_length = o.max_line;
    cfg.max_bulk_lines = o.max_bulk;
    cfg.idle_timeout_seconds = o.idle_timeout;
    cfg.format = parse_format(o.format);

    engine_holder engines;
    whois_server server(engines, cfg);
    const auto port = server.start();
    std::cerr << "listening on " << o.bind << ":" << port << ", loading " << o.snapshot << "\n";

    auto load = [&] {
        auto snap = load_snapshot(o.snapshot);
        engines.set(std::make_shared<const lookup_engine>(std::move(snap.engine)));
        std::cerr << "snapshot " << o.snapshot << " ready (checksum " << std::hex << snap.checksum << std::dec
                  << ")\n";
    };
    std::thread loader([&] {
        try {
            load();
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            g_stop = true;
        }
    });

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::signal(SIGHUP, on_signal);
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        if (g_reload.exchange(false)) {
            try {
                load();
            } catch (const std::exception& e) {
                std::cerr << "reload failed, keeping current data: " << e.what() << "\n";
            }
        }
    }
    loader.join();
    server.stop();
    return engines.get() ? exit_ok : exit_input_error;
}

struct query_options {
    std::string snapshot, input, output, format = "short", target, date;
};

int run_query(const query_options& o) {
    auto snap = load_snapshot(o.snapshot);
    const auto format = parse_format(o.format);
    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (!o.output.empty()) {
        file_out.open(o.output, std::ios::binary | std::ios::trunc);
        if (!file_out)
            throw input_error("cannot write " + o.output);
        out = &file_out;
    }

    if (!o.target.empty()) {
        std::istringstream one(o.target + (o.date.empty() ? "" : " " + o.date) + "\n");
        const auto stats = query_stream(snap.engine, one, *out, format);
        return stats.errors ? exit_input_error : exit_ok;
    }

    std::ifstream file_in;
    std::istream* in = &std::cin;
    if (!o.input.empty() && o.input != "-") {
        file_in.open(o.input, std::ios::binary);
        if (!file_in)
            throw input_error("cannot read " + o.input);
        in = &file_in;
    }
    const auto stats = query_stream(snap.engine, *in, *out, format);
    std::cerr << stats.lines << " queries, " << stats.errors << " errors, " << static_cast<long>(stats.rate())
              << " lookups/s\n";
    return exit_ok;
}

struct eval_options {
    std::string snapshot, reference, queries, out_prefix;
    unsigned v4_unit = 24, v6_unit = 48;
};

int run_eval(const eval_options& o) {
    auto snap = load_snapshot(o.snapshot);
    unit_granularity g{o.v4_unit, o.v6_unit};
    auto reference = reference_table::parse(slurp(o.reference), g);
    std::size_t bad_queries = 0;
    auto queries = parse_eval_queries(slurp(o.queries), &bad_queries);
    if (reference.malformed || bad_queries)
        std::cerr << "warning: skipped " << reference.malformed << " reference and " << bad_queries
                  << " query lines\n";

    const auto report = evaluate_disagreement(snap.engine, reference, queries, g);
    if (o.out_prefix.empty()) {
        std::cout << report.to_tsv();
    } else {
        write_text(o.out_prefix + ".tsv", report.to_tsv());
        write_text(o.out_prefix + ".histogram.tsv", report.histogram_tsv());
        write_text(o.out_prefix + ".json", report.to_json().dump(2) + "\n");
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Historic IP-to-AS attribution: snapshot builder, whois server and offline tools"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI configuration file");

    build_options bo;
    auto* build = app.add_subcommand("build", "Build a sealed snapshot from pfx2as and AS2ORG files");
    build->add_option("--pfx2as-v4", bo.v4_dir, "Directory of IPv4 pfx2as files")->check(CLI::ExistingDirectory);
    build->add_option("--pfx2as-v6", bo.v6_dir, "Directory of IPv6 pfx2as files")->check(CLI::ExistingDirectory);
    build->add_option("--as2org", bo.as2org_dir, "Directory of AS2ORG files")->check(CLI::ExistingDirectory);
    build->add_option("--from", bo.from, "First pfx2as day to import (YYYYMMDD)");
    build->add_option("--to", bo.to, "Last pfx2as day to import (YYYYMMDD)");
    build->add_option("-o,--out", bo.out, "Snapshot file to write")->required();
    build->add_option("--report", bo.report, "Write the per-file build report (JSON) here");
    build->add_option("--v4-min", bo.v4_min, "Shortest accepted IPv4 prefix")->check(CLI::Range(0, 32));
    build->add_option("--v4-max", bo.v4_max, "Longest accepted IPv4 prefix")->check(CLI::Range(0, 32));
    build->add_option("--v6-min", bo.v6_min, "Shortest accepted IPv6 prefix")->check(CLI::Range(0, 128));
    build->add_option("--v6-max", bo.v6_max, "Longest accepted IPv6 prefix")->check(CLI::Range(0, 128));
    build->add_flag("--no-reserved", bo.no_reserved, "Do not seed special-use prefixes");

    serve_options so;
    auto* serve = app.add_subcommand("serve", "Serve a snapshot over the whois line protocol");
    serve->add_option("-s,--snapshot", so.snapshot, "Snapshot file")->required()->envname("HISTWHOIS_SNAPSHOT");
    serve->add_option("--bind", so.bind, "Listen address")->envname("HISTWHOIS_BIND");
    serve->add_option("-p,--port", so.port, "Listen port")->envname("HISTWHOIS_PORT");
    serve->add_option("--contact", so.contact, "Contact shown in the banner")->envname("HISTWHOIS_CONTACT");
    serve->add_option("--max-line", so.max_line, "Maximum request line length")->envname("HISTWHOIS_MAX_LINE");
    serve->add_option("--max-bulk", so.max_bulk, "Maximum queries per bulk session")->envname("HISTWHOIS_MAX_BULK");
    serve->add_option("--idle-timeout", so.idle_timeout, "Idle connection timeout, seconds")
        ->envname("HISTWHOIS_IDLE_TIMEOUT");
    serve->add_option("--format", so.format, "short | verbose")->envname("HISTWHOIS_FORMAT");

    query_options qo;
    auto* query = app.add_subcommand("query", "Answer queries offline, same output as bulk mode");
    query->add_option("-s,--snapshot", qo.snapshot, "Snapshot file")->required();
    query->add_option("target", qo.target, "Single IP address or prefix");
    query->add_option("date", qo.date, "Query day (YYYYMMDD)");
    query->add_option("-i,--input", qo.input, "File of '<target> <YYYYMMDD>' lines ('-' for stdin)");
    query->add_option("-o,--output", qo.output, "Output file (default stdout)");
    query->add_option("--format", qo.format, "short | verbose");

    eval_options eo;
    auto* eval = app.add_subcommand("eval", "Per-month attribution disagreement against a reference table");
    eval->add_option("-s,--snapshot", eo.snapshot, "Snapshot file")->required();
    eval->add_option("-r,--reference", eo.reference, "Reference table, '<unit>|<asn list>' lines")->required();
    eval->add_option("-q,--queries", eo.queries, "Query list, '<address> <YYYYMM>' lines")->required();
    eval->add_option("-o,--out-prefix", eo.out_prefix, "Write <prefix>.tsv, .histogram.tsv and .json");
    eval->add_option("--v4-unit", eo.v4_unit, "IPv4 unit prefix length")->check(CLI::Range(0, 32));
    eval->add_option("--v6-unit", eo.v6_unit, "IPv6 unit prefix length")->check(CLI::Range(0, 128));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_input_error;
    }

    try {
        if (*build)
            return run_build(bo);
        if (*serve)
            return run_serve(so);
        if (*query)
            return run_query(qo);
        if (*eval)
            return run_eval(eo);
    } catch (const build_error& e) {
        std::cerr << "build error: " << e.what() << "\n";
        return exit_build_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_input_error;
    }
    return exit_ok;
}
