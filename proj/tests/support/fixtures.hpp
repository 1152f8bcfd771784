#pragma once

#include <string>
#include <vector>

#include "histwhois/as2org_timeline.hpp"
#include "histwhois/filter.hpp"
#include "histwhois/ingest.hpp"
#include "histwhois/lookup.hpp"
#include "histwhois/temporal_trie.hpp"

namespace histwhois::testing {

inline day d(const char* yyyymmdd) { return day::parse_or_throw(yyyymmdd); }

inline pfx2as_line line(const char* prefix, std::vector<asn_t> asns, day date,
                        origin_kind kind = origin_kind::single) {
    origin_spec o{std::move(asns), kind};
    if (kind == origin_kind::single && o.asns.size() > 1)
        o.kind = origin_kind::moas;
    return {*ip_prefix::parse(prefix), o, date};
}

/// AS2ORG text for one quarterly snapshot in the pipe-delimited layout.
inline const char* cloudflare_as2org_text() {
    return "# format:org_id|changed|org_name|country|source\n"
           "@family-471|20180703|Cloudflare Inc|US|ARIN,RIPE\n"
           "GOGL-ARIN|20171101|Google LLC|US|ARIN\n"
           "# format:aut|changed|aut_name|org_id|opaque_id|source\n"
           "13335|20180703|CLOUDFLARENET-AS|@family-471||RIPE\n"
           "15169|20120223|GOOGLE|GOGL-ARIN||ARIN\n";
}

/// A small world reproducing the documented Cloudflare example: 1.1.1.0/24 by
/// AS13335 seen daily from 20180320 through the newest day 20210215, and
/// 8.8.8.0/24 by AS15169 over the same days.
inline lookup_engine cloudflare_engine() {
    std::vector<as2org_snapshot> snaps;
    for (const char* date : {"20180401", "20180703", "20201001", "20210101"})
        snaps.push_back(parse_as2org(cloudflare_as2org_text(), d(date)));

    trie_builder b;
    for (day x = d("20180320"); x <= d("20210215"); x = x.next()) {
        b.insert_day(line("1.1.1.0/24", {13335}, x));
        b.insert_day(line("8.8.8.0/24", {15169}, x));
    }
    b.seed_reserved(default_reserved_prefixes());
    return lookup_engine{std::move(b).finalize(), as2org_timeline::build(snaps)};
}

/// 130 IPv4 /24 units announced daily through January-March 2020. Ten of them
/// (units 0..9) move from AS64 to AS65 on 20200201. The reference table holds
/// the post-move attribution, so January disagrees on 10/130 units and March on none.
struct moved_units_fixture {
    lookup_engine engine;
    std::string reference_text;
    std::string queries_text;
};

inline moved_units_fixture moved_units() {
    auto unit = [](int i) { return "44." + std::to_string(i / 256) + "." + std::to_string(i % 256) + ".0/24"; };
    trie_builder b;
    for (day x = d("20200101"); x <= d("20200331"); x = x.next())
        for (int i = 0; i < 130; ++i) {
            const bool moved = i < 10 && x < d("20200201");
            const asn_t asn = i < 10 ? (moved ? 64 : 65) : 1000 + static_cast<asn_t>(i);
            b.insert_day(line(unit(i).c_str(), {asn}, x));
        }
    moved_units_fixture f{lookup_engine{std::move(b).finalize(), {}}, "", ""};
    for (int i = 0; i < 130; ++i) {
        f.reference_text += unit(i) + "|" + std::to_string(i < 10 ? 65 : 1000 + i) + "\n";
        f.queries_text += unit(i) + " 202001\n";
        f.queries_text += unit(i) + " 202003\n";
    }
    return f;
}

} // namespace histwhois::testing
