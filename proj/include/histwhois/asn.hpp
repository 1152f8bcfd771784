#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace histwhois {

using asn_t = std::uint32_t;

namespace detail {

inline std::optional<std::uint64_t> parse_decimal(std::string_view s, std::uint64_t max) {
    if (s.empty() || s.size() > 10)
        return std::nullopt;
    std::uint64_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9')
            return std::nullopt;
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    if (v > max)
        return std::nullopt;
    return v;
}

} // namespace detail

/// Parses an ASN in asplain ("13335") or asdot ("1.10" == 65546) notation.
inline std::optional<asn_t> parse_asn(std::string_view s) {
    const auto dot = s.find('.');
    if (dot == std::string_view::npos) {
        auto v = detail::parse_decimal(s, 0xFFFFFFFFull);
        if (!v)
            return std::nullopt;
        return static_cast<asn_t>(*v);
    }
    auto high = detail::parse_decimal(s.substr(0, dot), 0xFFFF);
    auto low = detail::parse_decimal(s.substr(dot + 1), 0xFFFF);
    if (!high || !low)
        return std::nullopt;
    return static_cast<asn_t>(*high * 65536 + *low);
}

enum class origin_kind : std::uint8_t { single, moas, as_set };

inline std::string_view to_string(origin_kind k) {
    switch (k) {
    case origin_kind::single:
        return "single";
    case origin_kind::moas:
        return "moas";
    case origin_kind::as_set:
        return "as_set";
    }
    return "single";
}

/// The origin column of a pfx2as line. `asns` is sorted and unique.
struct origin_spec {
    std::vector<asn_t> asns;
    origin_kind kind = origin_kind::single;

    bool operator==(const origin_spec&) const = default;

    /// `_` separates MOAS members, `,` separates AS-set members; both may appear together.
    static std::optional<origin_spec> parse(std::string_view s) {
        if (s.empty())
            return std::nullopt;
        origin_spec out;
        bool saw_set = false;
        std::size_t start = 0;
        while (start <= s.size()) {
            const auto end = s.find_first_of("_,", start);
            const auto token = s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
            auto asn = parse_asn(token);
            if (!asn)
                return std::nullopt;
            out.asns.push_back(*asn);
            if (end == std::string_view::npos)
                break;
            if (s[end] == ',')
                saw_set = true;
            start = end + 1;
        }
        std::sort(out.asns.begin(), out.asns.end());
        out.asns.erase(std::unique(out.asns.begin(), out.asns.end()), out.asns.end());
        if (saw_set)
            out.kind = origin_kind::as_set;
        else if (out.asns.size() > 1)
            out.kind = origin_kind::moas;
        return out;
    }
};

} // namespace histwhois
