#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "histwhois/ingest.hpp"
#include "histwhois/lookup.hpp"

namespace histwhois {

using ordered_json = nlohmann::ordered_json;

enum class output_format { json_short, json_verbose };

namespace detail {

inline ordered_json nullable_day(const std::optional<day>& d) {
    return d ? ordered_json(d->yyyymmdd()) : ordered_json(nullptr);
}

inline ordered_json day_list(const std::vector<day>& days) {
    auto a = ordered_json::array();
    for (day d : days)
        a.push_back(d.str());
    return a;
}

inline std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty())
            out += ',';
        out += id;
    }
    return out;
}

inline void dump_compact(const ordered_json& j, std::string& out) {
    if (j.is_object()) {
        out += '{';
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first)
                out += ", ";
            first = false;
            out += ordered_json(it.key()).dump(-1, ' ', true, nlohmann::json::error_handler_t::replace);
            out += ": ";
            dump_compact(it.value(), out);
        }
        out += '}';
    } else if (j.is_array()) {
        out += '[';
        bool first = true;
        for (const auto& v : j) {
            if (!first)
                out += ", ";
            first = false;
            dump_compact(v, out);
        }
        out += ']';
    } else {
        out += j.dump(-1, ' ', true, nlohmann::json::error_handler_t::replace);
    }
}

} // namespace detail

/// Compact single-line JSON with `", "` and `": "` separators and ASCII-only strings.
inline std::string dump_compact(const ordered_json& j) {
    std::string out;
    detail::dump_compact(j, out);
    return out;
}

/// Four-space indented JSON, ASCII-only strings.
inline std::string dump_pretty(const ordered_json& j) {
    return j.dump(4, ' ', true, nlohmann::json::error_handler_t::replace);
}

/// The JSON-SHORT answer object (keys IP, QDATE, results).
inline ordered_json to_json_short(const lookup_result& r) {
    ordered_json j;
    j["IP"] = r.ip;
    j["QDATE"] = r.qdate.str();
    if (r.status == match_status::not_found) {
        j["results"] = ordered_json::array();
        return j;
    }
    ordered_json res;
    if (r.status == match_status::reserved) {
        res["prefix"] = r.prefix->str();
        res["RESERVED"] = r.reserved_label;
        j["results"] = std::move(res);
        return j;
    }
    res["DATA_FIRST"] = r.data_first.yyyymmdd();
    res["DATA_LAST"] = detail::nullable_day(r.data_last);
    res["asns"] = r.asns;
    res["prefix"] = r.prefix->str();
    auto as2org = ordered_json::array();
    for (const auto& a : r.as2org) {
        ordered_json e;
        e["ASN"] = a.asn;
        e["ASNAME"] = a.mapping ? ordered_json(a.mapping->value.as_name) : ordered_json(nullptr);
        e["RIR"] = a.mapping ? ordered_json(a.mapping->value.source) : ordered_json(nullptr);
        auto orgs = ordered_json::array();
        for (const auto& o : a.orgs) {
            ordered_json oj;
            if (o.org) {
                oj["CC"] = o.org->value.country;
                oj["RIR"] = join_sources(o.org->value.sources);
                oj["ASORG"] = o.org->value.org_name;
            } else {
                oj["CC"] = nullptr;
                oj["RIR"] = nullptr;
                oj["ASORG"] = nullptr;
            }
            orgs.push_back(std::move(oj));
        }
        e["orgs"] = std::move(orgs);
        as2org.push_back(std::move(e));
    }
    res["as2org"] = std::move(as2org);
    if (r.kind != origin_kind::single)
        res["ORIGIN_KIND"] = std::string(to_string(r.kind));
    j["results"] = std::move(res);
    return j;
}

/// The verbose answer object (keys ipaddr, qdate, results with timestamp/until/aslist/orgmapping).
inline ordered_json to_json_verbose(const lookup_result& r) {
    ordered_json j;
    j["ipaddr"] = r.ip;
    j["qdate"] = r.qdate.str();
    if (r.status == match_status::not_found) {
        j["results"] = ordered_json::array();
        return j;
    }
    ordered_json res;
    if (r.status == match_status::reserved) {
        res["prefix"] = r.prefix->str();
        res["reserved"] = r.reserved_label;
        j["results"] = std::move(res);
        return j;
    }
    res["timestamp"] = r.data_first.yyyymmdd();
    res["until"] = detail::nullable_day(r.data_last);
    res["prefix"] = r.prefix->str();
    res["aslist"] = r.asns;
    ordered_json mapping = ordered_json::object();
    for (const auto& a : r.as2org) {
        auto list = ordered_json::array();
        if (a.mapping) {
            const auto& m = *a.mapping;
            ordered_json e;
            e["asn"] = a.asn;
            e["aut"] = {{"aut", a.asn},
                        {"aut_name", m.value.as_name},
                        {"org_id", detail::join_ids(m.value.org_ids)},
                        {"opaque_id", m.value.opaque_id},
                        {"source", m.value.source}};
            e["seen"] = detail::day_list(m.seen);
            e["changed"] = m.valid_from.str();
            e["change_guessed"] = m.change_guessed;
            auto orgs = ordered_json::array();
            for (const auto& o : a.orgs) {
                ordered_json oj;
                oj["org_id"] = o.org_id;
                if (o.org) {
                    oj["org"] = {{"org_id", o.org->value.org_id},
                                 {"org_name", o.org->value.org_name},
                                 {"country", o.org->value.country},
                                 {"source", join_sources(o.org->value.sources)}};
                    oj["seen"] = detail::day_list(o.org->seen);
                    oj["changed"] = o.org->valid_from.str();
                    oj["change_guessed"] = o.org->change_guessed;
                } else {
                    oj["org"] = nullptr;
                    oj["seen"] = ordered_json::array();
                    oj["changed"] = nullptr;
                    oj["change_guessed"] = false;
                }
                orgs.push_back(std::move(oj));
            }
            e["orgs"] = std::move(orgs);
            list.push_back(std::move(e));
        }
        mapping[std::to_string(a.asn)] = std::move(list);
    }
    res["orgmapping"] = std::move(mapping);
    if (r.kind != origin_kind::single)
        res["origin_kind"] = std::string(to_string(r.kind));
    j["results"] = std::move(res);
    return j;
}

inline ordered_json to_json(const lookup_result& r, output_format f) {
    return f == output_format::json_short ? to_json_short(r) : to_json_verbose(r);
}

/// One line, as emitted in bulk mode and by offline batch queries.
inline std::string format_line(const lookup_result& r, output_format f = output_format::json_short) {
    return dump_compact(to_json(r, f));
}

} // namespace histwhois
