#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histwhois/as2org_timeline.hpp"
#include "histwhois/filter.hpp"
#include "histwhois/ingest.hpp"
#include "histwhois/lookup.hpp"
#include "histwhois/temporal_trie.hpp"

namespace histwhois {

struct build_config {
    std::optional<std::filesystem::path> pfx2as_v4_dir;
    std::optional<std::filesystem::path> pfx2as_v6_dir;
    std::optional<std::filesystem::path> as2org_dir;
    std::optional<day> from; ///< inclusive bounds on pfx2as snapshot dates
    std::optional<day> to;
    filter_policy policy;
    bool seed_reserved = true;
};

struct file_report {
    std::string name;
    dataset_kind kind = dataset_kind::pfx2as_v4;
    day date;
    std::size_t total = 0;
    std::size_t accepted = 0;
    std::size_t malformed = 0;
    std::map<reject_reason, std::size_t> rejected;
    std::string error; ///< non-empty when the file was skipped

    std::size_t rejected_total() const {
        std::size_t n = 0;
        for (const auto& [r, c] : rejected)
            n += c;
        return n;
    }
};

struct build_report {
    std::vector<file_report> files;

    std::size_t failed_files() const {
        return static_cast<std::size_t>(
            std::count_if(files.begin(), files.end(), [](const file_report& f) { return !f.error.empty(); }));
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json files_json = nlohmann::ordered_json::array();
        std::size_t total = 0, accepted = 0, malformed = 0, rejected = 0;
        for (const auto& f : files) {
            nlohmann::ordered_json j;
            j["file"] = f.name;
            j["kind"] = std::string(to_string(f.kind));
            j["date"] = f.date.str();
            j["total"] = f.total;
            j["accepted"] = f.accepted;
            nlohmann::ordered_json rej = nlohmann::ordered_json::object();
            for (const auto& [r, c] : f.rejected)
                rej[std::string(to_string(r))] = c;
            j["rejected"] = std::move(rej);
            j["malformed"] = f.malformed;
            if (!f.error.empty())
                j["error"] = f.error;
            files_json.push_back(std::move(j));
            total += f.total;
            accepted += f.accepted;
            malformed += f.malformed;
            rejected += f.rejected_total();
        }
        nlohmann::ordered_json out;
        out["files"] = std::move(files_json);
        out["totals"] = {{"files", files.size()},
                         {"failed_files", failed_files()},
                         {"lines", total},
                         {"accepted", accepted},
                         {"rejected", rejected},
                         {"malformed", malformed}};
        return out;
    }
};

struct build_output {
    lookup_engine engine;
    nlohmann::ordered_json metadata;
    build_report report;
};

inline nlohmann::ordered_json policy_to_json(const filter_policy& p) {
    nlohmann::ordered_json j;
    j["v4"] = {p.v4_min_len, p.v4_max_len};
    j["v6"] = {p.v6_min_len, p.v6_max_len};
    auto ranges = nlohmann::ordered_json::array();
    for (const auto& r : p.reserved_asn_ranges)
        ranges.push_back({r.first, r.last});
    j["reserved_asns"] = std::move(ranges);
    auto prefixes = nlohmann::ordered_json::array();
    for (const auto& r : p.reserved_prefixes)
        prefixes.push_back({r.prefix.str(), r.label});
    j["reserved_prefixes"] = std::move(prefixes);
    return j;
}

/// Ingest, interpolate AS2ORG, replay pfx2as by date, and seal.
/// Individual unreadable files are reported and skipped.
inline build_output build_engine(const build_config& cfg, std::ostream& warnings = std::cerr) {
    if (cfg.from && cfg.to && *cfg.from > *cfg.to)
        throw build_error("empty date range: " + cfg.from->str() + " > " + cfg.to->str());
    if (!cfg.pfx2as_v4_dir && !cfg.pfx2as_v6_dir)
        throw build_error("no pfx2as input directory given");

    struct pending_file {
        discovered_file file;
        dataset_kind kind;
    };
    std::vector<pending_file> pfx_files;
    auto collect = [&](const std::optional<std::filesystem::path>& dir, dataset_kind kind) {
        if (!dir)
            return;
        try {
            for (auto& f : discover_files(*dir, kind, warnings)) {
                if ((cfg.from && f.date < *cfg.from) || (cfg.to && f.date > *cfg.to))
                    continue;
                pfx_files.push_back({std::move(f), kind});
            }
        } catch (const ingest_error& e) {
            throw build_error(e.what());
        }
    };
    collect(cfg.pfx2as_v4_dir, dataset_kind::pfx2as_v4);
    collect(cfg.pfx2as_v6_dir, dataset_kind::pfx2as_v6);
    std::stable_sort(pfx_files.begin(), pfx_files.end(), [](const pending_file& a, const pending_file& b) {
        return std::pair(a.file.date, a.kind) < std::pair(b.file.date, b.kind);
    });

    build_output out;
    nlohmann::ordered_json sources = nlohmann::ordered_json::array();

    // AS2ORG first: the timeline is independent of the replay.
    std::vector<as2org_snapshot> as2org_snaps;
    if (cfg.as2org_dir) {
        std::vector<discovered_file> files;
        try {
            files = discover_files(*cfg.as2org_dir, dataset_kind::as2org, warnings);
        } catch (const ingest_error& e) {
            throw build_error(e.what());
        }
        for (const auto& f : files) {
            if (cfg.to && f.date > *cfg.to)
                continue;
            file_report rep;
            rep.name = f.path.filename().string();
            rep.kind = dataset_kind::as2org;
            rep.date = f.date;
            try {
                auto snap = parse_as2org_file(f.path, f.date);
                rep.malformed = snap.malformed;
                rep.accepted = snap.as_entries.size() + snap.org_entries.size();
                rep.total = rep.accepted + rep.malformed;
                as2org_snaps.push_back(std::move(snap));
                sources.push_back({{"kind", "as2org"}, {"date", f.date.str()}, {"file", rep.name}});
            } catch (const std::exception& e) {
                rep.error = e.what();
                warnings << "warning: skipping " << f.path.string() << ": " << e.what() << "\n";
            }
            out.report.files.push_back(std::move(rep));
        }
        if (as2org_snaps.empty())
            throw build_error("no usable AS2ORG files under " + cfg.as2org_dir->string());
    } else {
        warnings << "warning: no AS2ORG directory given; answers will carry no organization data\n";
    }
    as2org_timeline timeline = as2org_snaps.empty() ? as2org_timeline{} : as2org_timeline::build(as2org_snaps);
    as2org_snaps.clear();

    trie_builder builder;
    std::size_t usable = 0;
    std::optional<day> first_date, last_date;
    for (const auto& [f, kind] : pfx_files) {
        file_report rep;
        rep.name = f.path.filename().string();
        rep.kind = kind;
        rep.date = f.date;
        try {
            auto parsed = parse_pfx2as_file(f.path, f.date);
            builder.begin_day(kind == dataset_kind::pfx2as_v6 ? ip_family::v6 : ip_family::v4, f.date);
            rep.total = parsed.total_lines;
            rep.malformed = parsed.malformed;
            for (const auto& line : parsed.lines) {
                const auto verdict = apply_filter(line, cfg.policy);
                if (verdict != reject_reason::none) {
                    ++rep.rejected[verdict];
                    continue;
                }
                builder.insert_day(line);
                ++rep.accepted;
            }
            ++usable;
            if (!first_date)
                first_date = f.date;
            last_date = f.date;
            sources.push_back({{"kind", std::string(to_string(kind))}, {"date", f.date.str()}, {"file", rep.name}});
        } catch (const ingest_error& e) {
            rep.error = e.what();
            warnings << "warning: skipping " << f.path.string() << ": " << e.what() << "\n";
        }
        out.report.files.push_back(std::move(rep));
    }
    if (usable == 0)
        throw build_error("no usable pfx2as files found");

    if (cfg.seed_reserved)
        builder.seed_reserved(cfg.policy.reserved_prefixes);
    auto trie = std::move(builder).finalize();

    out.engine = lookup_engine{std::move(trie), std::move(timeline)};
    out.metadata["format"] = "histwhois-snapshot";
    out.metadata["sources"] = std::move(sources);
    out.metadata["date_span"] = {first_date->str(), last_date->str()};
    out.metadata["filter"] = policy_to_json(cfg.policy);
    out.metadata["prefixes"] = {{"v4", out.engine.prefix_count(ip_family::v4)},
                                {"v6", out.engine.prefix_count(ip_family::v6)}};
    out.metadata["as2org"] = {{"ases", out.engine.timeline().as_count()},
                              {"orgs", out.engine.timeline().org_count()}};
    return out;
}

} // namespace histwhois
