#include <gtest/gtest.h>

#include <random>

#include "histwhois/json_output.hpp"
#include "histwhois/snapshot.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"
#include "support/world_engine.hpp"

using namespace histwhois;
using namespace histwhois::testing;

namespace {

nlohmann::ordered_json meta() { return {{"format", "histwhois-snapshot"}, {"note", "test"}}; }

} // namespace

TEST(Snapshot, RoundTripIsByteStable) {
    const auto engine = cloudflare_engine();
    const auto bytes = serialize_snapshot(engine, meta());
    EXPECT_EQ(serialize_snapshot(engine, meta()), bytes);
    const auto loaded = deserialize_snapshot(bytes);
    EXPECT_EQ(loaded.metadata, meta());
    EXPECT_EQ(serialize_snapshot(loaded.engine, loaded.metadata), bytes);
    EXPECT_EQ(loaded.checksum, snapshot_checksum(bytes));
    EXPECT_EQ(loaded.engine.prefix_count(ip_family::v4), engine.prefix_count(ip_family::v4));
    EXPECT_EQ(loaded.engine.newest_date(), engine.newest_date());
    EXPECT_EQ(loaded.engine.timeline(), engine.timeline());
}

TEST(Snapshot, LoadedEngineAnswersIdentically) {
    std::mt19937_64 rng(3);
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        const auto w = make_world(seed, 300, 30);
        const auto engine = engine_from_world(w);
        const auto loaded = deserialize_snapshot(serialize_snapshot(engine, meta()));
        for (int q = 0; q < 500; ++q) {
            ip_address a;
            a.family = rng() % 3 == 0 ? ip_family::v6 : ip_family::v4;
            a.bytes[0] = a.family == ip_family::v6 ? 0x2a : 44;
            for (unsigned bit = a.family == ip_family::v6 ? 30 : 14; bit < a.bits(); ++bit)
                a.set_bit(bit, rng() % 2);
            const day qdate = w.start + static_cast<int>(rng() % static_cast<unsigned>(w.days + 3));
            const auto text = a.str();
            ASSERT_EQ(format_line(loaded.engine.lookup(text, qdate), output_format::json_verbose),
                      format_line(engine.lookup(text, qdate), output_format::json_verbose));
        }
    }
}

TEST(Snapshot, FileRoundTrip) {
    temp_dir dir;
    const auto engine = cloudflare_engine();
    const auto bytes = serialize_snapshot(engine, meta());
    save_snapshot(dir.path() / "a.snap", bytes);
    EXPECT_FALSE(std::filesystem::exists(dir.path() / "a.snap.tmp"));
    const auto loaded = load_snapshot(dir.path() / "a.snap");
    EXPECT_EQ(serialize_snapshot(loaded.engine, loaded.metadata), bytes);
    EXPECT_THROW(load_snapshot(dir.path() / "missing.snap"), snapshot_error);
}

TEST(Snapshot, RefusesWrongVersion) {
    auto bytes = serialize_snapshot(cloudflare_engine(), meta());
    bytes[snapshot_magic.size()] = 2;
    try {
        deserialize_snapshot(bytes);
        FAIL() << "accepted a version 2 snapshot";
    } catch (const snapshot_error& e) {
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }
}

TEST(Snapshot, RefusesCorruption) {
    const auto bytes = serialize_snapshot(cloudflare_engine(), meta());
    EXPECT_THROW(deserialize_snapshot(bytes.substr(0, bytes.size() - 1)), snapshot_error);
    EXPECT_THROW(deserialize_snapshot(bytes + "x"), snapshot_error);
    EXPECT_THROW(deserialize_snapshot("HWSNAP"), snapshot_error);
    EXPECT_THROW(deserialize_snapshot("garbage that is not a snapshot"), snapshot_error);
    std::mt19937 rng(1);
    for (int i = 0; i < 300; ++i) {
        auto damaged = bytes;
        const auto pos = snapshot_magic.size() + 12 + rng() % (bytes.size() - snapshot_magic.size() - 12);
        damaged[pos] = static_cast<char>(damaged[pos] ^ (1 + rng() % 255));
        EXPECT_THROW(deserialize_snapshot(damaged), snapshot_error) << "flip at " << pos;
    }
}

TEST(Snapshot, EmptyEngine) {
    const lookup_engine empty;
    const auto bytes = serialize_snapshot(empty, meta());
    const auto loaded = deserialize_snapshot(bytes);
    EXPECT_EQ(serialize_snapshot(loaded.engine, loaded.metadata), bytes);
    EXPECT_FALSE(loaded.engine.newest_date());
}
