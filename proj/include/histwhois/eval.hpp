#pragma once

#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "histwhois/ingest.hpp"
#include "histwhois/lookup.hpp"

namespace histwhois {

/// Aggregation unit sizes for the comparison.
struct unit_granularity {
    unsigned v4_len = 24;
    unsigned v6_len = 48;

    ip_prefix unit_of(const ip_prefix& p) const {
        const unsigned len = p.family() == ip_family::v4 ? v4_len : v6_len;
        return ip_prefix{p.base, std::min(len, p.length)};
    }
};

using asn_set = std::set<asn_t>;

/// Current-attribution table: address unit to AS set.
/// One record per line, `<address-or-prefix>|<asn>[ <asn>...]`; ASNs may be
/// separated by spaces, commas or underscores. Lines for the same unit merge.
struct reference_table {
    std::map<ip_prefix, asn_set> units;
    std::size_t malformed = 0;

    static reference_table parse(std::string_view text, unit_granularity g = {}) {
        reference_table t;
        detail::for_each_line(text, [&](std::string_view line) {
            if (detail::is_blank(line) || line.front() == '#')
                return;
            const auto bar = line.find('|');
            if (bar == std::string_view::npos) {
                ++t.malformed;
                return;
            }
            auto target = ip_prefix::parse(trim(line.substr(0, bar)));
            if (!target) {
                ++t.malformed;
                return;
            }
            asn_set asns;
            std::string_view rest = line.substr(bar + 1);
            bool ok = true;
            std::size_t pos = 0;
            while (pos < rest.size()) {
                const auto end = rest.find_first_of(" ,_\t", pos);
                const auto tok = rest.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
                if (!tok.empty()) {
                    auto tok_clean = tok;
                    if (tok_clean.size() > 2 && (tok_clean.substr(0, 2) == "AS" || tok_clean.substr(0, 2) == "as"))
                        tok_clean.remove_prefix(2);
                    if (auto a = parse_asn(tok_clean))
                        asns.insert(*a);
                    else
                        ok = false;
                }
                if (end == std::string_view::npos)
                    break;
                pos = end + 1;
            }
            if (!ok || asns.empty()) {
                ++t.malformed;
                return;
            }
            t.units[g.unit_of(*target)].insert(asns.begin(), asns.end());
        });
        return t;
    }

private:
    static std::string_view trim(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
            s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
            s.remove_suffix(1);
        return s;
    }
};

/// A monthly comparison period, YYYYMM.
struct period {
    int year = 0;
    int month = 0;

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d%02d", year, month);
        return buf;
    }
    day first_day() const { return *day::from_ymd(year, month, 1); }
    auto operator<=>(const period&) const = default;

    static period of(day d) {
        const auto ymd = d.ymd();
        return {int(ymd.year()), static_cast<int>(unsigned(ymd.month()))};
    }

    /// Accepts YYYYMM or YYYYMMDD.
    static std::optional<period> parse(std::string_view s) {
        if (s.size() == 8) {
            if (auto d = day::parse(s))
                return of(*d);
            return std::nullopt;
        }
        if (s.size() != 6)
            return std::nullopt;
        if (auto d = day::parse(std::string(s) + "01"))
            return of(*d);
        return std::nullopt;
    }
};

struct eval_query {
    ip_prefix target;
    period when;
};

/// Parses `<target> <YYYYMM|YYYYMMDD>` lines. Malformed lines are counted.
inline std::vector<eval_query> parse_eval_queries(std::string_view text, std::size_t* malformed = nullptr) {
    std::vector<eval_query> out;
    detail::for_each_line(text, [&](std::string_view line) {
        if (detail::is_blank(line) || line.front() == '#')
            return;
        std::istringstream ss{std::string(line)};
        std::string target, when, extra;
        ss >> target >> when;
        auto p = ip_prefix::parse(target);
        auto w = period::parse(when);
        if (!p || !w || (ss >> extra)) {
            if (malformed)
                ++*malformed;
            return;
        }
        out.push_back({*p, *w});
    });
    return out;
}

struct period_stats {
    std::size_t compared = 0;
    std::size_t disagreeing = 0;
    std::size_t uncomparable = 0;

    double percent() const { return compared == 0 ? 0.0 : 100.0 * double(disagreeing) / double(compared); }
};

inline std::string asn_set_text(const asn_set& s) {
    std::string out;
    for (asn_t a : s) {
        if (!out.empty())
            out += '_';
        out += std::to_string(a);
    }
    return out;
}

struct disagreement_report {
    std::map<period, period_stats> periods;
    /// (reference ASes, historic ASes) -> disagreeing unit-periods
    std::map<std::pair<std::string, std::string>, std::size_t> histogram;

    std::string to_tsv() const {
        std::string out = "period\tcompared\tdisagreeing\tpercent\tuncomparable\n";
        char buf[64];
        for (const auto& [p, s] : periods) {
            std::snprintf(buf, sizeof buf, "%.2f", s.percent());
            out += p.str() + '\t' + std::to_string(s.compared) + '\t' + std::to_string(s.disagreeing) + '\t' + buf +
                   '\t' + std::to_string(s.uncomparable) + '\n';
        }
        return out;
    }

    std::string histogram_tsv() const {
        std::string out = "reference_asns\thistoric_asns\tunits\n";
        for (const auto& [k, n] : histogram)
            out += k.first + '\t' + k.second + '\t' + std::to_string(n) + '\n';
        return out;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        auto ps = nlohmann::ordered_json::array();
        for (const auto& [p, s] : periods)
            ps.push_back({{"period", p.str()},
                          {"compared", s.compared},
                          {"disagreeing", s.disagreeing},
                          {"percent", s.percent()},
                          {"uncomparable", s.uncomparable}});
        j["periods"] = std::move(ps);
        auto h = nlohmann::ordered_json::array();
        for (const auto& [k, n] : histogram)
            h.push_back({{"reference", k.first}, {"historic", k.second}, {"units", n}});
        j["histogram"] = std::move(h);
        return j;
    }
};

/// Compares historic attributions to a reference table per (unit, month).
/// The historic AS set of a unit is the union over the 1st, 14th and 28th of
/// the month; only identical sets count as agreement. Units missing from
/// either side are uncomparable and left out of the percentage.
inline disagreement_report evaluate_disagreement(const lookup_engine& engine, const reference_table& reference,
                                                 const std::vector<eval_query>& queries, unit_granularity g = {}) {
    std::set<std::pair<period, ip_prefix>> work;
    for (const auto& q : queries)
        work.emplace(q.when, g.unit_of(q.target));

    disagreement_report report;
    for (const auto& [when, unit] : work) {
        auto& stats = report.periods[when];
        const auto ref = reference.units.find(unit);
        const auto days = joined_sample_days(when.first_day());
        const auto joined = engine.lookup_joined(unit.str(), days);
        asn_set historic(joined.asns.begin(), joined.asns.end());
        for (day d : days)
            for (asn_t a : engine.asns_within(unit, d))
                historic.insert(a);
        if (ref == reference.units.end() || historic.empty()) {
            ++stats.uncomparable;
            continue;
        }
        ++stats.compared;
        if (ref->second != historic) {
            ++stats.disagreeing;
            ++report.histogram[{asn_set_text(ref->second), asn_set_text(historic)}];
        }
    }
    return report;
}

} // namespace histwhois
