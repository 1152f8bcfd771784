#pragma once

#include <zlib.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "histwhois/asn.hpp"
#include "histwhois/day.hpp"
#include "histwhois/filter.hpp"
#include "histwhois/ip.hpp"

namespace histwhois {

/// Raised when a whole input file cannot be used. The build skips the file.
class ingest_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Stream decoding

inline bool is_gzip(std::string_view bytes) {
    return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
           static_cast<unsigned char>(bytes[1]) == 0x8b;
}

/// Inflates gzip input (including concatenated members); plain text passes through.
inline std::string decode_stream(std::string bytes) {
    if (!is_gzip(bytes))
        return bytes;

    std::string out;
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
        throw ingest_error("zlib initialisation failed");
    zs.next_in = reinterpret_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    char chunk[1 << 16];
    int rc = Z_OK;
    for (;;) {
        zs.next_out = reinterpret_cast<Bytef*>(chunk);
        zs.avail_out = sizeof chunk;
        rc = inflate(&zs, Z_NO_FLUSH);
        out.append(chunk, sizeof chunk - zs.avail_out);
        if (rc == Z_STREAM_END) {
            if (zs.avail_in == 0)
                break;
            // another gzip member follows
            if (inflateReset(&zs) != Z_OK)
                break;
            continue;
        }
        if (rc != Z_OK) {
            inflateEnd(&zs);
            throw ingest_error(std::string("gzip stream undecodable: ") + (zs.msg ? zs.msg : "truncated input"));
        }
        if (zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw ingest_error("gzip stream truncated");
        }
    }
    inflateEnd(&zs);
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ingest_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_stream(std::move(ss).str());
}

namespace detail {

template <typename F>
void for_each_line(std::string_view text, F&& f) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = text.size();
        auto line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        f(line);
        pos = nl + 1;
    }
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto p = s.find(sep, start);
        if (p == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, p - start));
        start = p + 1;
    }
}

inline bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

} // namespace detail

// ---------------------------------------------------------------------------
// File discovery

enum class dataset_kind { pfx2as_v4, pfx2as_v6, as2org };

inline std::string_view to_string(dataset_kind k) {
    switch (k) {
    case dataset_kind::pfx2as_v4:
        return "pfx2as-v4";
    case dataset_kind::pfx2as_v6:
        return "pfx2as-v6";
    case dataset_kind::as2org:
        return "as2org";
    }
    return "";
}

struct discovered_file {
    day date;
    std::filesystem::path path;
};

/// First run of exactly eight digits in the name that forms a valid calendar date.
inline std::optional<day> date_from_file_name(std::string_view name) {
    std::size_t i = 0;
    while (i < name.size()) {
        if (name[i] < '0' || name[i] > '9') {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < name.size() && name[j] >= '0' && name[j] <= '9')
            ++j;
        if (j - i == 8) {
            if (auto d = day::parse(name.substr(i, 8)))
                return d;
        }
        i = j;
    }
    return std::nullopt;
}

inline bool matches_kind(std::string_view name, dataset_kind kind) {
    const bool pfx2as = name.find("pfx2as") != std::string_view::npos;
    const bool rv6 = name.find("rv6") != std::string_view::npos || name.find("ipv6") != std::string_view::npos;
    switch (kind) {
    case dataset_kind::pfx2as_v4:
        return pfx2as && !rv6;
    case dataset_kind::pfx2as_v6:
        return pfx2as && rv6;
    case dataset_kind::as2org:
        return name.find("as-org2info") != std::string_view::npos || name.find("as2org") != std::string_view::npos;
    }
    return false;
}

/// Lists the files of one dataset kind under `root`, one per date, ascending.
/// Several files for the same date resolve to the lexicographically last name.
inline std::vector<discovered_file> discover_files(const std::filesystem::path& root, dataset_kind kind,
                                                   std::ostream& warnings = std::cerr) {
    std::map<day, std::filesystem::path> by_date;
    std::error_code ec;
    if (!std::filesystem::is_directory(root, ec))
        throw ingest_error("not a readable directory: " + root.string());
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root, ec)) {
        if (!entry.is_regular_file())
            continue;
        const auto name = entry.path().filename().string();
        if (!matches_kind(name, kind))
            continue;
        auto date = date_from_file_name(name);
        if (!date) {
            warnings << "warning: skipping " << entry.path().string() << ": no YYYYMMDD date in file name\n";
            continue;
        }
        auto [it, inserted] = by_date.emplace(*date, entry.path());
        if (!inserted && it->second.filename().string() < name)
            it->second = entry.path();
    }
    std::vector<discovered_file> out;
    out.reserve(by_date.size());
    for (auto& [d, p] : by_date)
        out.push_back({d, p});
    return out;
}

// ---------------------------------------------------------------------------
// pfx2as

struct pfx2as_line {
    ip_prefix prefix;
    origin_spec origins;
    day snapshot_date;
};

inline reject_reason apply_filter(const pfx2as_line& line, const filter_policy& policy) {
    return apply_filter(line.prefix, line.origins, policy);
}

struct pfx2as_parse_result {
    std::vector<pfx2as_line> lines;
    std::size_t total_lines = 0;
    std::size_t malformed = 0;
};

/// Parses one `base<TAB>len<TAB>origins` record; nullopt if malformed.
inline std::optional<pfx2as_line> parse_pfx2as_line(std::string_view line, day snapshot_date) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3)
        return std::nullopt;
    auto base = ip_address::parse(fields[0]);
    if (!base)
        return std::nullopt;
    auto len = detail::parse_decimal(fields[1], base->bits());
    if (!len || fields[1].size() > 3)
        return std::nullopt;
    auto origins = origin_spec::parse(fields[2]);
    if (!origins)
        return std::nullopt;
    return pfx2as_line{ip_prefix{*base, static_cast<unsigned>(*len)}, std::move(*origins), snapshot_date};
}

inline pfx2as_parse_result parse_pfx2as(std::string_view text, day snapshot_date) {
    pfx2as_parse_result r;
    detail::for_each_line(text, [&](std::string_view line) {
        if (detail::is_blank(line))
            return;
        ++r.total_lines;
        if (auto parsed = parse_pfx2as_line(line, snapshot_date))
            r.lines.push_back(std::move(*parsed));
        else
            ++r.malformed;
    });
    return r;
}

inline pfx2as_parse_result parse_pfx2as_file(const std::filesystem::path& path, day snapshot_date) {
    return parse_pfx2as(read_file(path), snapshot_date);
}

// ---------------------------------------------------------------------------
// AS2ORG

struct as_entry {
    asn_t asn = 0;
    std::string as_name;
    std::string org_id;
    std::string opaque_id;
    std::string source;
    bool dangling = false; ///< org_id empty or absent from the org section
};

struct org_entry {
    std::string org_id;
    std::string org_name;
    std::string country;
    std::set<std::string> sources;
};

struct as2org_snapshot {
    day collection_date;
    std::vector<as_entry> as_entries;
    std::vector<org_entry> org_entries;
    std::size_t malformed = 0;
};

inline std::set<std::string> split_sources(std::string_view s) {
    std::set<std::string> out;
    for (auto part : detail::split(s, ',')) {
        while (!part.empty() && part.front() == ' ')
            part.remove_prefix(1);
        while (!part.empty() && part.back() == ' ')
            part.remove_suffix(1);
        if (!part.empty())
            out.emplace(part);
    }
    return out;
}

inline std::string join_sources(const std::set<std::string>& sources) {
    std::string out;
    for (const auto& s : sources) {
        if (!out.empty())
            out += ',';
        out += s;
    }
    return out;
}

namespace detail {

inline void mark_dangling(as2org_snapshot& snap) {
    std::set<std::string_view> known;
    for (const auto& o : snap.org_entries)
        known.insert(o.org_id);
    for (auto& a : snap.as_entries)
        a.dangling = a.org_id.empty() || !known.contains(a.org_id);
}

inline void parse_as2org_pipe(std::string_view text, as2org_snapshot& snap) {
    enum class section { unknown, aut, org } current = section::unknown;
    for_each_line(text, [&](std::string_view line) {
        if (is_blank(line))
            return;
        if (line.front() == '#') {
            if (line.find("aut|") != std::string_view::npos)
                current = section::aut;
            else if (line.find("org_id|") != std::string_view::npos)
                current = section::org;
            return;
        }
        const auto f = split(line, '|');
        section s = current;
        if (s == section::unknown)
            s = f.size() == 6 ? section::aut : section::org;
        if (s == section::aut) {
            auto asn = f.size() == 6 ? parse_asn(f[0]) : std::nullopt;
            if (!asn) {
                ++snap.malformed;
                return;
            }
            snap.as_entries.push_back({*asn, std::string(f[2]), std::string(f[3]), std::string(f[4]),
                                       std::string(f[5]), false});
        } else {
            if (f.size() != 5 || f[0].empty()) {
                ++snap.malformed;
                return;
            }
            snap.org_entries.push_back({std::string(f[0]), std::string(f[2]), std::string(f[3]), split_sources(f[4])});
        }
    });
}

inline std::string json_text(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null())
        return {};
    if (it->is_string())
        return it->get<std::string>();
    return it->dump();
}

inline void parse_as2org_jsonl(std::string_view text, as2org_snapshot& snap) {
    for_each_line(text, [&](std::string_view line) {
        if (is_blank(line))
            return;
        auto obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            ++snap.malformed;
            return;
        }
        const auto type = json_text(obj, "type");
        if (type == "ASN") {
            auto asn = parse_asn(json_text(obj, "asn"));
            if (!asn) {
                ++snap.malformed;
                return;
            }
            snap.as_entries.push_back({*asn, json_text(obj, "name"), json_text(obj, "organizationId"),
                                       json_text(obj, "opaqueId"), json_text(obj, "source"), false});
        } else if (type == "Organization") {
            auto id = json_text(obj, "organizationId");
            if (id.empty()) {
                ++snap.malformed;
                return;
            }
            snap.org_entries.push_back(
                {std::move(id), json_text(obj, "name"), json_text(obj, "country"), split_sources(json_text(obj, "source"))});
        } else {
            ++snap.malformed;
        }
    });
}

} // namespace detail

/// Parses an AS2ORG file in the pipe-delimited two-section format or the
/// one-JSON-object-per-line format, chosen by the first non-empty line.
inline as2org_snapshot parse_as2org(std::string_view text, day collection_date) {
    as2org_snapshot snap;
    snap.collection_date = collection_date;

    std::string_view first;
    detail::for_each_line(text, [&](std::string_view line) {
        if (first.empty() && !detail::is_blank(line))
            first = line;
    });
    while (!first.empty() && (first.front() == ' ' || first.front() == '\t'))
        first.remove_prefix(1);

    if (!first.empty() && first.front() == '{')
        detail::parse_as2org_jsonl(text, snap);
    else if (!first.empty() && (first.front() == '#' || first.find('|') != std::string_view::npos))
        detail::parse_as2org_pipe(text, snap);
    else
        throw ingest_error("unrecognised AS2ORG format");

    detail::mark_dangling(snap);
    return snap;
}

inline as2org_snapshot parse_as2org_file(const std::filesystem::path& path, day collection_date) {
    return parse_as2org(read_file(path), collection_date);
}

} // namespace histwhois
