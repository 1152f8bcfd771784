#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "histwhois/as2org_timeline.hpp"
#include "histwhois/day.hpp"
#include "histwhois/ip.hpp"
#include "histwhois/temporal_trie.hpp"

namespace histwhois {

/// Malformed query target or date. Distinct from a query that finds nothing.
class input_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct lookup_query {
    std::string text; ///< target as the client wrote it, echoed back
    ip_prefix target;
    day qdate;

    static lookup_query parse(std::string_view target, std::string_view date) {
        auto p = ip_prefix::parse(target);
        if (!p)
            throw input_error("invalid IP address or prefix '" + std::string(target) + "'");
        auto d = day::parse(date);
        if (!d)
            throw input_error("invalid date '" + std::string(date) + "', expected YYYYMMDD");
        return {std::string(target), *p, *d};
    }
};

struct org_detail {
    std::string org_id;
    std::optional<org_epoch> org; ///< empty when the org_id does not resolve at qdate
};

struct as2org_detail {
    asn_t asn = 0;
    std::optional<as_org_epoch> mapping; ///< empty when the ASN has no mapping at qdate
    std::vector<org_detail> orgs;
};

struct lookup_result {
    std::string ip;
    day qdate;
    match_status status = match_status::not_found;
    std::optional<ip_prefix> prefix;
    day data_first;
    std::optional<day> data_last;
    std::vector<asn_t> asns;
    origin_kind kind = origin_kind::single;
    std::vector<as2org_detail> as2org;
    std::string reserved_label;

    bool found() const { return status == match_status::found; }
};

/// Merge of lookups for one target on several days.
struct joined_result {
    std::string ip;
    std::vector<lookup_result> per_date; ///< one per requested day, ascending
    std::vector<asn_t> asns;             ///< union over found days
    match_status status = match_status::not_found;
    bool multi_state = false; ///< found days disagree on prefix or ASNs
};

/// Read-only query engine over a sealed trie and AS2ORG timeline.
class lookup_engine {
public:
    lookup_engine() = default;
    lookup_engine(temporal_trie trie, as2org_timeline timeline)
        : trie_(std::move(trie)), timeline_(std::move(timeline)) {
        v4_prefixes_ = trie_.prefix_count(ip_family::v4);
        v6_prefixes_ = trie_.prefix_count(ip_family::v6);
    }

    const temporal_trie& trie() const { return trie_; }
    const as2org_timeline& timeline() const { return timeline_; }
    std::size_t prefix_count(ip_family f) const { return f == ip_family::v4 ? v4_prefixes_ : v6_prefixes_; }

    /// Default query date: the newest imported snapshot.
    std::optional<day> newest_date() const { return trie_.newest(); }

    lookup_result lookup(const lookup_query& q) const {
        lookup_result r;
        r.ip = q.text;
        r.qdate = q.qdate;
        const auto m = trie_.match(q.target, q.qdate);
        r.status = m.status;
        if (m.status == match_status::reserved) {
            r.prefix = *m.prefix;
            r.reserved_label = *m.reserved_label;
            return r;
        }
        if (m.status != match_status::found)
            return r;
        r.prefix = *m.prefix;
        r.data_first = m.epoch->first_seen;
        r.data_last = m.epoch->last_seen;
        r.asns = m.epoch->origin_asns;
        r.kind = m.epoch->kind;
        r.as2org.reserve(r.asns.size());
        for (asn_t a : r.asns)
            r.as2org.push_back(resolve(a, q.qdate));
        return r;
    }

    lookup_result lookup(std::string_view target, day qdate) const {
        auto p = ip_prefix::parse(target);
        if (!p)
            throw input_error("invalid IP address or prefix '" + std::string(target) + "'");
        return lookup(lookup_query{std::string(target), *p, qdate});
    }

    joined_result lookup_joined(std::string_view target, std::vector<day> dates) const {
        std::sort(dates.begin(), dates.end());
        dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
        joined_result j;
        j.ip = std::string(target);
        std::set<asn_t> all;
        std::optional<std::pair<ip_prefix, std::vector<asn_t>>> first_state;
        for (day d : dates) {
            auto r = lookup(target, d);
            if (r.found()) {
                j.status = match_status::found;
                all.insert(r.asns.begin(), r.asns.end());
                std::pair<ip_prefix, std::vector<asn_t>> state{*r.prefix, r.asns};
                if (!first_state)
                    first_state = state;
                else if (*first_state != state)
                    j.multi_state = true;
            } else if (r.status == match_status::reserved && j.status == match_status::not_found) {
                j.status = match_status::reserved;
            }
            j.per_date.push_back(std::move(r));
        }
        j.asns.assign(all.begin(), all.end());
        return j;
    }

    /// ASNs attributed anywhere inside `unit` on `date`: the unit's own answer plus
    /// every stored more-specific prefix within it that is announced that day.
    std::vector<asn_t> asns_within(const ip_prefix& unit, day date) const {
        std::set<asn_t> out;
        const auto m = trie_.match(unit, date);
        if (m.status == match_status::found)
            out.insert(m.epoch->origin_asns.begin(), m.epoch->origin_asns.end());
        trie_.tree(unit.family()).for_each_within(unit, [&](const ip_prefix& p, const prefix_record& rec) {
            if (p.length <= unit.length)
                return;
            if (const auto* e = rec.epoch_at(date))
                out.insert(e->origin_asns.begin(), e->origin_asns.end());
        });
        return {out.begin(), out.end()};
    }

private:
    as2org_detail resolve(asn_t asn, day date) const {
        as2org_detail d;
        d.asn = asn;
        auto res = timeline_.org_at(asn, date);
        if (!res)
            return d;
        d.mapping = *res->epoch;
        for (const auto& o : res->orgs) {
            org_detail od{o.org_id, std::nullopt};
            if (o.epoch)
                od.org = *o.epoch;
            d.orgs.push_back(std::move(od));
        }
        return d;
    }

    temporal_trie trie_;
    as2org_timeline timeline_;
    std::size_t v4_prefixes_ = 0;
    std::size_t v6_prefixes_ = 0;
};

/// The 1st, 14th and 28th of the month containing `d`.
inline std::vector<day> joined_sample_days(day d) {
    const auto ymd = d.ymd();
    const int y = int(ymd.year());
    const int m = static_cast<int>(unsigned(ymd.month()));
    return {*day::from_ymd(y, m, 1), *day::from_ymd(y, m, 14), *day::from_ymd(y, m, 28)};
}

} // namespace histwhois
