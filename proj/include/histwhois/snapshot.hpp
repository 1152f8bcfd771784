#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "histwhois/lookup.hpp"

namespace histwhois {

class snapshot_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view snapshot_magic = "HWSNAP\r\n";
inline constexpr std::uint32_t snapshot_version = 1;

namespace detail {

class byte_writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i)
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i)
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.append(s);
    }
    void date(day d) { i32(d.count()); }
    void opt_date(const std::optional<day>& d) {
        u8(d ? 1 : 0);
        i32(d ? d->count() : 0);
    }
    std::string take() && { return std::move(out_); }

private:
    std::string out_;
};

class byte_reader {
public:
    explicit byte_reader(std::string_view in) : in_(in) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(in_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= std::uint32_t{u8()} << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= std::uint64_t{u8()} << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::string str() {
        const auto n = u32();
        need(n);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    day date() { return day{i32()}; }
    std::optional<day> opt_date() {
        const bool has = u8() != 0;
        const day d{i32()};
        return has ? std::optional<day>{d} : std::nullopt;
    }
    /// Element counts are bounded by the remaining bytes to reject corrupt sizes early.
    std::uint64_t count(std::size_t min_element_size = 1) {
        const auto n = u64();
        if (n > (in_.size() - pos_) / min_element_size)
            throw snapshot_error("snapshot truncated or corrupt");
        return n;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n)
            throw snapshot_error("snapshot truncated or corrupt");
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

template <typename Value>
void write_timed(byte_writer& w, const timed_value<Value>& t) {
    w.date(t.valid_from);
    w.opt_date(t.valid_to);
    w.u8(t.change_guessed ? 1 : 0);
    w.u64(t.seen.size());
    for (day d : t.seen)
        w.date(d);
}

template <typename Value>
void read_timed(byte_reader& r, timed_value<Value>& t) {
    t.valid_from = r.date();
    t.valid_to = r.opt_date();
    t.change_guessed = r.u8() != 0;
    const auto n = r.count(4);
    t.seen.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i)
        t.seen.push_back(r.date());
}

inline std::uint32_t crc32_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), chunk);
        pos += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

} // namespace detail

/// Serializes a sealed engine plus build metadata. Output is a pure function of
/// the inputs, so identical builds yield identical bytes.
inline std::string serialize_snapshot(const lookup_engine& engine, const nlohmann::ordered_json& metadata) {
    detail::byte_writer w;
    w.str(metadata.dump(-1, ' ', true, nlohmann::json::error_handler_t::replace));

    const auto& trie = engine.trie();
    w.opt_date(trie.newest(ip_family::v4));
    w.opt_date(trie.newest(ip_family::v6));
    for (auto fam : {ip_family::v4, ip_family::v6}) {
        const auto& tree = trie.tree(fam);
        w.u64(tree.size());
        tree.for_each([&](const ip_prefix& p, const prefix_record& rec) {
            for (auto b : p.base.bytes)
                w.u8(b);
            w.u8(static_cast<std::uint8_t>(p.length));
            w.u8(rec.reserved_label ? 1 : 0);
            if (rec.reserved_label)
                w.str(*rec.reserved_label);
            w.u64(rec.epochs.size());
            for (const auto& e : rec.epochs) {
                w.date(e.first_seen);
                w.opt_date(e.last_seen);
                w.u8(static_cast<std::uint8_t>(e.kind));
                w.u64(e.origin_asns.size());
                for (asn_t a : e.origin_asns)
                    w.u32(a);
            }
        });
    }

    const auto& tl = engine.timeline();
    w.u64(tl.as_epochs().size());
    for (const auto& [asn, epochs] : tl.as_epochs()) {
        w.u32(asn);
        w.u64(epochs.size());
        for (const auto& e : epochs) {
            detail::write_timed(w, e);
            w.str(e.value.as_name);
            w.str(e.value.source);
            w.str(e.value.opaque_id);
            w.u64(e.value.org_ids.size());
            for (const auto& id : e.value.org_ids)
                w.str(id);
        }
    }
    w.u64(tl.org_epochs().size());
    for (const auto& [id, epochs] : tl.org_epochs()) {
        w.str(id);
        w.u64(epochs.size());
        for (const auto& e : epochs) {
            detail::write_timed(w, e);
            w.str(e.value.org_id);
            w.str(e.value.org_name);
            w.str(e.value.country);
            w.u64(e.value.sources.size());
            for (const auto& s : e.value.sources)
                w.str(s);
        }
    }
    const std::string payload = std::move(w).take();

    detail::byte_writer out;
    std::string file(snapshot_magic);
    out.u32(snapshot_version);
    out.u64(payload.size());
    file += std::move(out).take();
    file += payload;
    detail::byte_writer tail;
    tail.u32(detail::crc32_of(payload));
    file += std::move(tail).take();
    return file;
}

struct loaded_snapshot {
    lookup_engine engine;
    nlohmann::ordered_json metadata;
    std::uint32_t checksum = 0;
};

/// Checksum stored in a serialized snapshot (CRC-32 of the payload).
inline std::uint32_t snapshot_checksum(std::string_view bytes) {
    if (bytes.size() < 4)
        throw snapshot_error("snapshot truncated");
    detail::byte_reader r(bytes.substr(bytes.size() - 4));
    return r.u32();
}

inline loaded_snapshot deserialize_snapshot(std::string_view bytes) {
    if (bytes.substr(0, snapshot_magic.size()) != snapshot_magic)
        throw snapshot_error("not a snapshot file");
    detail::byte_reader header(bytes.substr(snapshot_magic.size()));
    const auto version = header.u32();
    if (version != snapshot_version)
        throw snapshot_error("unsupported snapshot version " + std::to_string(version) + " (expected " +
                             std::to_string(snapshot_version) + ")");
    const auto payload_len = header.u64();
    const std::size_t start = snapshot_magic.size() + 12;
    if (bytes.size() != start + payload_len + 4)
        throw snapshot_error("snapshot truncated or corrupt");
    const auto payload = bytes.substr(start, payload_len);
    const auto checksum = snapshot_checksum(bytes);
    if (detail::crc32_of(payload) != checksum)
        throw snapshot_error("snapshot checksum mismatch");

    detail::byte_reader r(payload);
    loaded_snapshot out;
    out.checksum = checksum;
    out.metadata = nlohmann::ordered_json::parse(r.str());

    const auto newest_v4 = r.opt_date();
    const auto newest_v6 = r.opt_date();
    std::vector<std::pair<ip_prefix, prefix_record>> records;
    for (auto fam : {ip_family::v4, ip_family::v6}) {
        const auto n = r.count(26);
        for (std::uint64_t i = 0; i < n; ++i) {
            ip_address base;
            base.family = fam;
            for (auto& b : base.bytes)
                b = r.u8();
            const unsigned len = r.u8();
            if (len > base.bits())
                throw snapshot_error("snapshot contains an invalid prefix length");
            prefix_record rec;
            if (r.u8() != 0)
                rec.reserved_label = r.str();
            const auto ne = r.count(18);
            rec.epochs.reserve(ne);
            for (std::uint64_t k = 0; k < ne; ++k) {
                attribution_epoch e;
                e.first_seen = r.date();
                e.last_seen = r.opt_date();
                const auto kind = r.u8();
                if (kind > static_cast<std::uint8_t>(origin_kind::as_set))
                    throw snapshot_error("snapshot contains an invalid origin kind");
                e.kind = static_cast<origin_kind>(kind);
                const auto na = r.count(4);
                e.origin_asns.reserve(na);
                for (std::uint64_t x = 0; x < na; ++x)
                    e.origin_asns.push_back(r.u32());
                rec.epochs.push_back(std::move(e));
            }
            records.emplace_back(ip_prefix{base, len}, std::move(rec));
        }
    }
    auto trie = temporal_trie::from_records(std::move(records), newest_v4, newest_v6);

    as2org_timeline::as_map ases;
    const auto n_as = r.count(12);
    for (std::uint64_t i = 0; i < n_as; ++i) {
        const asn_t asn = r.u32();
        auto& epochs = ases[asn];
        const auto ne = r.count(8);
        for (std::uint64_t k = 0; k < ne; ++k) {
            as_org_epoch e;
            detail::read_timed(r, e);
            e.value.as_name = r.str();
            e.value.source = r.str();
            e.value.opaque_id = r.str();
            const auto no = r.count(4);
            for (std::uint64_t x = 0; x < no; ++x)
                e.value.org_ids.push_back(r.str());
            epochs.push_back(std::move(e));
        }
    }
    as2org_timeline::org_map orgs;
    const auto n_org = r.count(12);
    for (std::uint64_t i = 0; i < n_org; ++i) {
        auto& epochs = orgs[r.str()];
        const auto ne = r.count(8);
        for (std::uint64_t k = 0; k < ne; ++k) {
            org_epoch e;
            detail::read_timed(r, e);
            e.value.org_id = r.str();
            e.value.org_name = r.str();
            e.value.country = r.str();
            const auto ns = r.count(4);
            for (std::uint64_t x = 0; x < ns; ++x)
                e.value.sources.insert(r.str());
            epochs.push_back(std::move(e));
        }
    }
    if (!r.done())
        throw snapshot_error("trailing bytes in snapshot payload");
    out.engine = lookup_engine{std::move(trie), as2org_timeline{std::move(ases), std::move(orgs)}};
    return out;
}

inline void save_snapshot(const std::filesystem::path& path, std::string_view bytes) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw snapshot_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw snapshot_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline loaded_snapshot load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw snapshot_error("cannot open snapshot " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_snapshot(ss.str());
}

} // namespace histwhois
