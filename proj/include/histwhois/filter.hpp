#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "histwhois/asn.hpp"
#include "histwhois/ip.hpp"

namespace histwhois {

struct asn_range {
    asn_t first;
    asn_t last;

    bool contains(asn_t a) const { return a >= first && a <= last; }
    bool operator==(const asn_range&) const = default;
};

struct reserved_prefix {
    ip_prefix prefix;
    std::string label;
};

/// Private, documentation, and otherwise reserved AS numbers.
inline std::vector<asn_range> default_reserved_asn_ranges() {
    return {
        {0, 0},
        {23456, 23456},
        {64496, 64511},
        {64512, 65534},
        {65535, 65535},
        {65536, 65551},
        {65552, 131071},
        {4200000000u, 4294967294u},
        {4294967295u, 4294967295u},
    };
}

/// Special-purpose address blocks that are not globally routable; answered as reserved.
inline std::vector<reserved_prefix> default_reserved_prefixes() {
    const std::pair<const char*, const char*> table[] = {
        {"0.0.0.0/8", "This network (RFC791)"},
        {"10.0.0.0/8", "Private-Use (RFC1918)"},
        {"100.64.0.0/10", "Shared Address Space (RFC6598)"},
        {"127.0.0.0/8", "Loopback (RFC1122)"},
        {"169.254.0.0/16", "Link Local (RFC3927)"},
        {"172.16.0.0/12", "Private-Use (RFC1918)"},
        {"192.0.0.0/24", "IETF Protocol Assignments (RFC6890)"},
        {"192.0.2.0/24", "Documentation (TEST-NET-1, RFC5737)"},
        {"192.168.0.0/16", "Private-Use (RFC1918)"},
        {"198.18.0.0/15", "Benchmarking (RFC2544)"},
        {"198.51.100.0/24", "Documentation (TEST-NET-2, RFC5737)"},
        {"203.0.113.0/24", "Documentation (TEST-NET-3, RFC5737)"},
        {"224.0.0.0/4", "Multicast (RFC5771)"},
        {"240.0.0.0/4", "Reserved (RFC1112)"},
        {"::/128", "Unspecified Address (RFC4291)"},
        {"::1/128", "Loopback Address (RFC4291)"},
        {"::ffff:0:0/96", "IPv4-mapped Address (RFC4291)"},
        {"100::/64", "Discard-Only Address Block (RFC6666)"},
        {"2001:db8::/32", "Documentation (RFC3849)"},
        {"3fff::/20", "Documentation (RFC9637)"},
        {"fc00::/7", "Unique-Local (RFC4193)"},
        {"fe80::/10", "Link-Local Unicast (RFC4291)"},
        {"ff00::/8", "Multicast (RFC4291)"},
    };
    std::vector<reserved_prefix> out;
    for (const auto& [text, label] : table)
        out.push_back({*ip_prefix::parse(text), label});
    return out;
}

struct filter_policy {
    unsigned v4_min_len = 8;
    unsigned v4_max_len = 24;
    unsigned v6_min_len = 18;
    unsigned v6_max_len = 48;
    std::vector<asn_range> reserved_asn_ranges = default_reserved_asn_ranges();
    std::vector<reserved_prefix> reserved_prefixes = default_reserved_prefixes();

    bool is_reserved_asn(asn_t a) const {
        for (const auto& r : reserved_asn_ranges)
            if (r.contains(a))
                return true;
        return false;
    }
};

enum class reject_reason : std::uint8_t { none, too_short, too_specific, reserved_asn };

inline std::string_view to_string(reject_reason r) {
    switch (r) {
    case reject_reason::none:
        return "accepted";
    case reject_reason::too_short:
        return "too_short";
    case reject_reason::too_specific:
        return "too_specific";
    case reject_reason::reserved_asn:
        return "reserved_asn";
    }
    return "accepted";
}

/// Returns reject_reason::none when the announcement may enter the index.
inline reject_reason apply_filter(const ip_prefix& prefix, const origin_spec& origins, const filter_policy& policy) {
    const bool v4 = prefix.family() == ip_family::v4;
    const unsigned lo = v4 ? policy.v4_min_len : policy.v6_min_len;
    const unsigned hi = v4 ? policy.v4_max_len : policy.v6_max_len;
    if (prefix.length < lo)
        return reject_reason::too_short;
    if (prefix.length > hi)
        return reject_reason::too_specific;
    for (asn_t a : origins.asns)
        if (policy.is_reserved_asn(a))
            return reject_reason::reserved_asn;
    return reject_reason::none;
}

} // namespace histwhois
