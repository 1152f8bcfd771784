// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <sys/resource.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "histwhois/batch.hpp"
#include "histwhois/build.hpp"
#include "histwhois/eval.hpp"
#include "histwhois/json_output.hpp"
#include "histwhois/snapshot.hpp"
#include "histwhois/whois_server.hpp"
#include "support/fixtures.hpp"
#include "support/tcp_client.hpp"
#include "support/world_engine.hpp"

using namespace histwhois;
using namespace histwhois::testing;
using clock_type = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr int oracle_worlds = 1000;
constexpr double oracle_budget_seconds = 300.0;
constexpr double throughput_floor = 1200.0; // lookups per second
constexpr double throughput_run_seconds = 60.0;
constexpr std::size_t throughput_prefixes = 1'000'000;
constexpr double memory_ceiling_bytes = 16.0 * 1024 * 1024 * 1024;
constexpr const char* expected_before = "7.69";
constexpr const char* expected_after = "0.00";

struct check_failed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok)
        throw check_failed(what);
}

double seconds_since(clock_type::time_point t) { return std::chrono::duration<double>(clock_type::now() - t).count(); }

match_status as_status(oracle_answer::kind_t k) {
    switch (k) {
    case oracle_answer::kind_t::found: return match_status::found;
    case oracle_answer::kind_t::reserved: return match_status::reserved;
    default: return match_status::not_found;
    }
}

// 1. Randomized worlds against the linear-scan oracle.
std::string oracle_equivalence() {
    const auto start = clock_type::now();
    std::mt19937_64 rng(20240601);
    std::size_t lookups = 0, found = 0;
    for (int seed = 0; seed < oracle_worlds; ++seed) {
        const auto w = make_world(static_cast<std::uint64_t>(seed) * 7919 + 1);
        const brute_force_oracle oracle(w, default_reserved_prefixes());
        const auto engine = engine_from_world(w);
        auto stored = oracle.prefixes();
        std::shuffle(stored.begin(), stored.end(), rng);
        if (stored.size() > 120)
            stored.resize(120);

        auto check = [&](bool v6, const std::array<std::uint8_t, 16>& bytes, unsigned max_len, day qdate) {
            ip_address a;
            a.family = v6 ? ip_family::v6 : ip_family::v4;
            a.bytes = bytes;
            const ip_prefix target{a, max_len};
            const auto r = engine.lookup(lookup_query{target.str(), target, qdate});
            const auto e = oracle.query(v6, bytes, max_len, qdate);
            ++lookups;
            const auto where = "world " + std::to_string(seed) + ": " + target.str() + " @ " + qdate.str();
            require(r.status == as_status(e.status), where + " status differs");
            if (r.status == match_status::not_found)
                return;
            require(r.prefix->str() == e.prefix, where + " prefix " + r.prefix->str() + " vs " + e.prefix);
            if (r.status == match_status::reserved) {
                require(r.reserved_label == e.reserved_label, where + " reserved label differs");
                return;
            }
            ++found;
            require(r.data_first == e.first && r.data_last == e.last, where + " epoch bounds differ");
            require(r.asns == e.asns, where + " ASNs differ");
            require(r.kind == e.kind, where + " origin kind differs");
        };
        auto random_day = [&] { return w.start + std::uniform_int_distribution<int>(-1, w.days + 1)(rng); };

        for (const auto& p : stored) {
            const unsigned bits = p.v6 ? 128 : 32;
            auto low = p.bytes, high = p.bytes, mid = p.bytes;
            for (unsigned b = p.len; b < bits; ++b) {
                high[b / 8] |= static_cast<std::uint8_t>(1u << (7 - b % 8));
                if (rng() % 2)
                    mid[b / 8] |= static_cast<std::uint8_t>(1u << (7 - b % 8));
            }
            for (const auto& addr : {low, high, mid}) {
                check(p.v6, addr, bits, random_day());
                check(p.v6, addr, bits, w.start + std::uniform_int_distribution<int>(0, std::max(0, w.days - 1))(rng));
            }
            check(p.v6, mid, p.len, random_day());
            check(p.v6, mid, std::uniform_int_distribution<unsigned>(0, bits)(rng), random_day());
        }
        for (int q = 0; q < 60; ++q) {
            const bool v6 = rng() % 3 == 0;
            std::array<std::uint8_t, 16> bytes{};
            const unsigned bits = v6 ? 128 : 32;
            for (unsigned b = 0; b < bits / 8; ++b)
                bytes[b] = static_cast<std::uint8_t>(rng());
            if (q % 2 == 0) {
                bytes[0] = v6 ? 0x2a : 44;
                if (v6)
                    bytes[1] = bytes[2] = bytes[4] = 0;
                bytes[1] &= 3;
                if (v6)
                    bytes[3] &= 3;
            }
            check(v6, bytes, bits, random_day());
        }
    }
    const double elapsed = seconds_since(start);
    require(elapsed < oracle_budget_seconds, "took " + std::to_string(elapsed) + " s");
    require(found > lookups / 10, "too few found answers to be meaningful");
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d worlds, %zu lookups (%zu found), all equal to oracle in %.1f s", oracle_worlds,
                  lookups, found, elapsed);
    return buf;
}

// 2. Documented Cloudflare answer, field by field.
std::string fixture_fidelity() {
    const auto engine = cloudflare_engine();
    const auto j = nlohmann::json::parse(format_line(engine.lookup("1.1.1.1", d("20210101"))));
    const auto& r = j.at("results");
    require(j.at("IP") == "1.1.1.1" && j.at("QDATE") == "20210101", "echo fields");
    require(r.at("prefix") == "1.1.1.0/24", "prefix");
    require(r.at("asns") == nlohmann::json::array({13335}), "asns");
    require(r.at("DATA_FIRST") == 20180320, "DATA_FIRST");
    require(r.at("DATA_LAST").is_null(), "DATA_LAST");
    require(r.at("as2org").size() == 1, "as2org size");
    const auto& a = r.at("as2org")[0];
    require(a.at("ASN") == 13335 && a.at("ASNAME") == "CLOUDFLARENET-AS", "ASN/ASNAME");
    require(a.at("orgs").size() == 1, "orgs size");
    const auto& o = a.at("orgs")[0];
    require(o.at("ASORG") == "Cloudflare Inc" && o.at("CC") == "US" && o.at("RIR") == "ARIN,RIPE", "org fields");
    const auto miss = format_line(engine.lookup("1.1.1.1", d("20120101")));
    require(miss == R"({"IP": "1.1.1.1", "QDATE": "20120101", "results": []})", "not-found line: " + miss);
    return "1.1.1.1@20210101 field-exact, 1.1.1.1@20120101 empty results";
}

// 3. TCP bulk session against the offline batch output.
std::string protocol_transcript() {
    engine_holder holder(std::make_shared<const lookup_engine>(cloudflare_engine()));
    server_config cfg;
    cfg.bind_address = "127.0.0.1";
    cfg.port = 0;
    whois_server server(holder, cfg);
    const auto port = server.start();
    const std::string body = "begin\n1.1.1.1 20210101\n1.1.1.1 20120101\n8.8.8.8 20210201\nend\n";
    std::string transcript;
    {
        tcp_client c(port);
        c.send(body);
        transcript = c.read_all();
    }
    server.stop();

    std::istringstream in(body);
    std::ostringstream offline;
    query_stream(*holder.get(), in, offline);

    std::vector<std::string> lines;
    std::istringstream ts(transcript);
    for (std::string l; std::getline(ts, l);)
        lines.push_back(l);
    require(lines.size() == 7 + 3 + 1, "expected 11 lines, got " + std::to_string(lines.size()));
    require(lines[0] == "# This is the historic IP to AS mapping service" && lines[6] == "# READY", "banner");
    std::string json_part;
    for (int i = 7; i < 10; ++i) {
        const auto j = nlohmann::json::parse(lines[static_cast<std::size_t>(i)]);
        require(j.contains("IP") && j.contains("QDATE") && j.contains("results"), "JSON line " + std::to_string(i));
        json_part += lines[static_cast<std::size_t>(i)] + "\n";
    }
    require(nlohmann::json::parse(lines[7])["QDATE"] == "20210101" &&
                nlohmann::json::parse(lines[8])["QDATE"] == "20120101" &&
                nlohmann::json::parse(lines[9])["IP"] == "8.8.8.8",
            "order");
    require(lines[10] == "# goodbye", "goodbye");
    require(json_part == offline.str(), "TCP lines differ from offline output");
    return "banner, 3 in-order JSON lines and goodbye; byte-identical to offline batch";
}

// 4. The four AS2ORG interpolation cases.
std::string as2org_cases() {
    auto snap = [](const char* date, std::vector<as_entry> ases) {
        as2org_snapshot s;
        s.collection_date = d(date);
        s.as_entries = std::move(ases);
        return s;
    };
    auto aut = [](asn_t asn, const char* org) { return as_entry{asn, "N", org, "", "ARIN", false}; };
    // 1 unchanged, 2 removed, 3 added, 4 changed
    const auto tl = as2org_timeline::build({snap("20200101", {aut(1, "A"), aut(2, "B"), aut(4, "C")}),
                                            snap("20200401", {aut(1, "A"), aut(3, "D"), aut(4, "E")})});
    const auto& e1 = *tl.epochs(1);
    require(e1.size() == 1 && e1[0].valid_from == d("20200101") && !e1[0].valid_to && !e1[0].change_guessed,
            "unchanged");
    const auto& e2 = *tl.epochs(2);
    require(e2.size() == 1 && e2[0].valid_to == d("20200101") && tl.org_at(2, d("20200101")) &&
                !tl.org_at(2, d("20200102")),
            "removed");
    const auto& e3 = *tl.epochs(3);
    require(e3.size() == 1 && e3[0].valid_from == d("20200401") && !tl.org_at(3, d("20200331")) &&
                tl.org_at(3, d("20200401")),
            "added");
    const auto& e4 = *tl.epochs(4);
    require(e4.size() == 2 && e4[0].valid_to == d("20200101") && e4[1].valid_from == d("20200102") &&
                e4[1].change_guessed && !e4[0].change_guessed,
            "changed boundaries");
    require(tl.org_at(4, d("20200101"))->epoch->value.org_ids[0] == "C" &&
                tl.org_at(4, d("20200102"))->epoch->value.org_ids[0] == "E",
            "changed lookup");
    return "unchanged merged; removed ends 20200101; added starts 20200401; changed switches 20200102 (guessed)";
}

// 5. Filter conformance over boundary values and random input.
std::string filter_conformance() {
    static const std::uint32_t boundary[] = {0,      1,     23455,  23456,  23457,       64495,      64496,
                                             64511,  64512, 65534,  65535,  65536,       65551,      65552,
                                             131071, 131072, 4199999999u, 4200000000u, 4294967294u, 4294967295u};
    auto independently_reserved = [](std::uint32_t a) {
        return a == 0 || a == 23456 || (a >= 64496 && a <= 131071) || a >= 4200000000u;
    };
    std::mt19937_64 rng(5);
    trie_builder b;
    const filter_policy policy;
    std::size_t offered = 0, accepted = 0;
    for (int day_index = 0; day_index < 30; ++day_index) {
        const day date = d("20200101") + day_index;
        for (int i = 0; i < 3000; ++i) {
            const bool v6 = rng() % 2;
            ip_address a;
            a.family = v6 ? ip_family::v6 : ip_family::v4;
            a.bytes[0] = v6 ? 0x2a : 44;
            for (unsigned bit = 8; bit < a.bits(); ++bit)
                a.set_bit(bit, rng() % 2);
            const unsigned len = std::uniform_int_distribution<unsigned>(0, a.bits())(rng);
            std::vector<asn_t> asns;
            const int n = 1 + static_cast<int>(rng() % 3);
            for (int k = 0; k < n; ++k)
                asns.push_back(rng() % 2 ? boundary[rng() % std::size(boundary)] : static_cast<asn_t>(rng()));
            std::sort(asns.begin(), asns.end());
            asns.erase(std::unique(asns.begin(), asns.end()), asns.end());
            const pfx2as_line l{ip_prefix{a, len},
                                origin_spec{asns, rng() % 4 == 0 ? origin_kind::as_set
                                                  : asns.size() > 1 ? origin_kind::moas
                                                                    : origin_kind::single},
                                date};
            ++offered;
            if (apply_filter(l, policy) == reject_reason::none) {
                b.insert_day(l);
                ++accepted;
            }
        }
    }
    for (auto asn : boundary) {
        const pfx2as_line l{*ip_prefix::parse("44.0.0.0/16"), origin_spec{{asn}, origin_kind::single}, d("20200131")};
        require((apply_filter(l, policy) == reject_reason::reserved_asn) == independently_reserved(asn),
                "boundary ASN " + std::to_string(asn));
    }
    for (unsigned len = 0; len <= 128; ++len) {
        if (len <= 32) {
            const pfx2as_line l4{ip_prefix{*ip_address::parse("44.0.0.0"), len}, origin_spec{{1}, origin_kind::single},
                                 d("20200131")};
            require((apply_filter(l4, policy) == reject_reason::none) == (len >= 8 && len <= 24),
                    "v4 length " + std::to_string(len));
        }
        const pfx2as_line l6{ip_prefix{*ip_address::parse("2a00::"), len}, origin_spec{{1}, origin_kind::single},
                             d("20200131")};
        require((apply_filter(l6, policy) == reject_reason::none) == (len >= 18 && len <= 48),
                "v6 length " + std::to_string(len));
    }

    const auto trie = std::move(b).finalize();
    std::size_t epochs = 0;
    for (auto fam : {ip_family::v4, ip_family::v6}) {
        trie.tree(fam).for_each([&](const ip_prefix& p, const prefix_record& rec) {
            const unsigned lo = fam == ip_family::v4 ? 8 : 18, hi = fam == ip_family::v4 ? 24 : 48;
            if (!rec.epochs.empty())
                require(p.length >= lo && p.length <= hi, "stored out-of-bounds prefix " + p.str());
            for (const auto& e : rec.epochs) {
                ++epochs;
                for (auto asn : e.origin_asns)
                    require(!independently_reserved(asn), "stored reserved ASN " + std::to_string(asn));
            }
        });
    }
    require(accepted > 0 && accepted < offered, "input mix did not exercise both outcomes");
    return std::to_string(offered) + " lines offered, " + std::to_string(accepted) + " accepted, " +
           std::to_string(epochs) + " stored epochs clean; all boundary values agree";
}

std::size_t max_rss_bytes() {
    rusage u{};
    getrusage(RUSAGE_SELF, &u);
    return static_cast<std::size_t>(u.ru_maxrss) * 1024;
}

// 6. Sustained lookup rate on a 1M-prefix trie.
std::string throughput() {
    std::mt19937_64 rng(99);
    const auto build_start = clock_type::now();
    const day first = d("20200101");
    constexpr int days = 4;
    trie_builder b;
    const auto reserved = default_reserved_prefixes();
    std::set<ip_prefix> distinct;
    std::vector<std::pair<ip_prefix, asn_t>> prefixes;
    prefixes.reserve(throughput_prefixes);
    while (prefixes.size() < throughput_prefixes) {
        ip_address a;
        unsigned len;
        if (prefixes.size() % 5 == 4) {
            a.family = ip_family::v6;
            a.bytes[0] = static_cast<std::uint8_t>(0x20 | (rng() & 0x1f));
            for (unsigned k = 1; k < 6; ++k)
                a.bytes[k] = static_cast<std::uint8_t>(rng());
            len = std::uniform_int_distribution<unsigned>(18, 48)(rng);
        } else {
            a.family = ip_family::v4;
            const auto v = static_cast<std::uint32_t>(rng());
            for (unsigned k = 0; k < 4; ++k)
                a.bytes[k] = static_cast<std::uint8_t>(v >> (24 - 8 * k));
            len = std::uniform_int_distribution<unsigned>(8, 24)(rng);
            if (rng() % 10 < 7)
                len = std::uniform_int_distribution<unsigned>(20, 24)(rng);
        }
        const ip_prefix p{a, len};
        const bool special = std::any_of(reserved.begin(), reserved.end(), [&](const reserved_prefix& r) {
            return r.prefix.family() == p.family() && (r.prefix.contains(p) || p.contains(r.prefix));
        });
        if (special || !distinct.insert(p).second)
            continue;
        prefixes.emplace_back(p, static_cast<asn_t>(1 + rng() % 60000));
    }
    distinct.clear();
    for (int t = 0; t < days; ++t)
        for (std::size_t i = 0; i < prefixes.size(); ++i) {
            const asn_t asn = (t == 2 && i % 17 == 0) ? prefixes[i].second + 1 : prefixes[i].second;
            b.insert_day({prefixes[i].first, origin_spec{{asn}, origin_kind::single}, first + t});
        }
    b.seed_reserved(default_reserved_prefixes());
    prefixes = {};
    const lookup_engine engine{std::move(b).finalize(), {}};
    const double build_seconds = seconds_since(build_start);
    const std::size_t stored = engine.prefix_count(ip_family::v4) + engine.prefix_count(ip_family::v6);
    require(stored == throughput_prefixes, "only " + std::to_string(stored) + " distinct prefixes");

    // Queries are pre-generated so the timed loop measures lookup plus serialization.
    std::vector<std::pair<std::string, day>> queries(1 << 16);
    for (auto& [text, date] : queries) {
        ip_address a;
        if (rng() % 5 == 4) {
            a.family = ip_family::v6;
            a.bytes[0] = static_cast<std::uint8_t>(0x20 | (rng() & 0x1f));
            for (unsigned k = 1; k < 16; ++k)
                a.bytes[k] = static_cast<std::uint8_t>(rng());
        } else {
            a.family = ip_family::v4;
            const auto v = static_cast<std::uint32_t>(rng());
            for (unsigned k = 0; k < 4; ++k)
                a.bytes[k] = static_cast<std::uint8_t>(v >> (24 - 8 * k));
        }
        text = a.str();
        date = first + std::uniform_int_distribution<int>(-1, days)(rng);
    }

    std::size_t done = 0, found = 0, bytes = 0;
    const auto start = clock_type::now();
    double elapsed = 0;
    while (elapsed < throughput_run_seconds) {
        for (int k = 0; k < 4096; ++k, ++done) {
            const auto& [text, date] = queries[done & (queries.size() - 1)];
            const auto r = engine.lookup(text, date);
            found += r.found();
            bytes += format_line(r).size();
        }
        elapsed = seconds_since(start);
    }
    const double rate = double(done) / elapsed;
    const auto rss = max_rss_bytes();
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%zu prefixes (built in %.1f s), %.0f lookups/s over %.0f s (floor %.0f), %.1f%% found, "
                  "peak RSS %.2f GiB (ceiling 16 GiB)",
                  stored, build_seconds, rate, elapsed, throughput_floor, 100.0 * double(found) / double(done),
                  double(rss) / (1024.0 * 1024 * 1024));
    require(bytes > 0, "no output");
    require(rate >= throughput_floor, buf);
    require(double(rss) <= memory_ceiling_bytes, buf);
    return buf;
}

// 7. Synthetic disagreement world.
std::string synthetic_disagreement() {
    const auto f = moved_units();
    const auto rep =
        evaluate_disagreement(f.engine, reference_table::parse(f.reference_text), parse_eval_queries(f.queries_text));
    const auto tsv = rep.to_tsv();
    const std::string expect = std::string("period\tcompared\tdisagreeing\tpercent\tuncomparable\n") + "202001\t130\t10\t" +
                               expected_before + "\t0\n202003\t130\t0\t" + expected_after + "\t0\n";
    require(tsv == expect, "report was:\n" + tsv);
    std::size_t binned = 0;
    for (const auto& [k, n] : rep.histogram)
        binned += n;
    require(binned == 10, "histogram does not sum to disagreeing units");
    return std::string("10/130 units: ") + expected_before + "% before, " + expected_after + "% after";
}

// 8. Snapshot determinism and round trip from files on disk.
std::string snapshot_determinism() {
    const auto w = make_world(4242, 1000, 100);
    temp_dir dir;
    write_world(w, dir.path());
    write_file(dir / "as2org/20200101.as-org2info.txt", cloudflare_as2org_text());
    build_config cfg;
    cfg.pfx2as_v4_dir = dir.path() / "v4";
    cfg.pfx2as_v6_dir = dir.path() / "v6";
    cfg.as2org_dir = dir.path() / "as2org";
    std::ostringstream warnings;
    const auto a = build_engine(cfg, warnings);
    const auto b = build_engine(cfg, warnings);
    const auto bytes_a = serialize_snapshot(a.engine, a.metadata);
    const auto bytes_b = serialize_snapshot(b.engine, b.metadata);
    require(snapshot_checksum(bytes_a) == snapshot_checksum(bytes_b) && bytes_a == bytes_b, "rebuild differs");

    save_snapshot(dir / "s.snap", bytes_a);
    const auto loaded = load_snapshot(dir / "s.snap");
    std::size_t sweep = 0;
    const brute_force_oracle oracle(w, default_reserved_prefixes());
    for (const auto& p : oracle.prefixes()) {
        ip_address base;
        base.family = p.v6 ? ip_family::v6 : ip_family::v4;
        base.bytes = p.bytes;
        for (int t = -1; t <= w.days; ++t) {
            const day date = w.start + t;
            for (auto f : {output_format::json_short, output_format::json_verbose}) {
                const auto text = base.str();
                require(format_line(loaded.engine.lookup(text, date), f) == format_line(a.engine.lookup(text, date), f),
                        "loaded snapshot answers " + text + " @ " + date.str() + " differently");
                ++sweep;
            }
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "checksum %08x twice; %zu sweep answers identical after save/load",
                  snapshot_checksum(bytes_a), sweep);
    return buf;
}

} // namespace

int main(int argc, char** argv) {
    // optional argument: run only criteria whose name contains it
    const std::string only = argc > 1 ? argv[1] : "";
    const std::vector<std::pair<const char*, std::function<std::string()>>> criteria = {
        {"1 oracle equivalence", oracle_equivalence},
        {"2 fixture fidelity", fixture_fidelity},
        {"3 protocol transcript", protocol_transcript},
        {"4 as2org four cases", as2org_cases},
        {"5 filter conformance", filter_conformance},
        {"6 throughput floor", throughput},
        {"7 synthetic disagreement", synthetic_disagreement},
        {"8 snapshot determinism", snapshot_determinism},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        if (!only.empty() && std::string(name).find(only) == std::string::npos)
            continue;
        std::string detail;
        bool ok = false;
        try {
            detail = run();
            ok = true;
        } catch (const std::exception& e) {
            detail = e.what();
        }
        failures += !ok;
        std::cout << (ok ? "PASS" : "FAIL") << "  " << name << ": " << detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
