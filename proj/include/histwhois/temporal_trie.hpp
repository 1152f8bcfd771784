#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "histwhois/asn.hpp"
#include "histwhois/day.hpp"
#include "histwhois/filter.hpp"
#include "histwhois/ingest.hpp"
#include "histwhois/prefix_tree.hpp"

namespace histwhois {

/// Raised when the date-ordered replay contract is violated.
class build_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A maximal run of days during which a prefix had one origin set.
struct attribution_epoch {
    day first_seen;
    std::optional<day> last_seen; ///< empty: still present in the newest snapshot
    std::vector<asn_t> origin_asns; ///< sorted, unique, non-empty
    origin_kind kind = origin_kind::single;

    bool covers(day d) const { return d >= first_seen && (!last_seen || d <= *last_seen); }
    bool operator==(const attribution_epoch&) const = default;
};

struct prefix_record {
    std::vector<attribution_epoch> epochs; ///< ascending, non-overlapping
    std::optional<std::string> reserved_label;

    const attribution_epoch* epoch_at(day d) const {
        auto it = std::upper_bound(epochs.begin(), epochs.end(), d,
                                   [](day v, const attribution_epoch& e) { return v < e.first_seen; });
        if (it == epochs.begin())
            return nullptr;
        --it;
        return it->covers(d) ? &*it : nullptr;
    }

    bool operator==(const prefix_record&) const = default;
};

enum class match_status { found, not_found, reserved };

struct trie_match {
    match_status status = match_status::not_found;
    const ip_prefix* prefix = nullptr;
    const attribution_epoch* epoch = nullptr;    ///< set when found
    const std::string* reserved_label = nullptr; ///< set when reserved
};

/// Sealed, read-only index of date-ranged prefix attributions, one tree per family.
class temporal_trie {
public:
    using tree_type = prefix_tree<prefix_record>;

    temporal_trie() = default;

    const tree_type& tree(ip_family f) const { return f == ip_family::v4 ? v4_ : v6_; }
    std::optional<day> newest(ip_family f) const { return f == ip_family::v4 ? newest_v4_ : newest_v6_; }

    std::optional<day> newest() const {
        if (newest_v4_ && newest_v6_)
            return std::max(*newest_v4_, *newest_v6_);
        return newest_v4_ ? newest_v4_ : newest_v6_;
    }

    /// Announced (non-reserved) prefixes in one family.
    std::size_t prefix_count(ip_family f) const {
        std::size_t n = 0;
        tree(f).for_each([&](const ip_prefix&, const prefix_record& r) { n += r.epochs.empty() ? 0 : 1; });
        return n;
    }

    /// Most specific stored prefix containing `target` (no longer than it) whose
    /// epochs cover `date`, walking toward the root. Any enclosing reserved
    /// prefix takes precedence over announcements.
    trie_match match(const ip_prefix& target, day date) const {
        const auto& t = tree(target.family());
        const auto path = t.path(target.base, target.length);
        for (unsigned i = path.size; i-- > 0;) {
            const auto& rec = t.value_at(path.items[i]);
            if (rec.reserved_label)
                return {match_status::reserved, &t.prefix_at(path.items[i]), nullptr, &*rec.reserved_label};
        }
        for (unsigned i = path.size; i-- > 0;) {
            if (const auto* e = t.value_at(path.items[i]).epoch_at(date))
                return {match_status::found, &t.prefix_at(path.items[i]), e, nullptr};
        }
        return {};
    }

    static temporal_trie from_records(std::vector<std::pair<ip_prefix, prefix_record>> records,
                                      std::optional<day> newest_v4, std::optional<day> newest_v6) {
        temporal_trie t;
        for (auto& [p, r] : records)
            (p.family() == ip_family::v4 ? t.v4_ : t.v6_)[p] = std::move(r);
        t.newest_v4_ = newest_v4;
        t.newest_v6_ = newest_v6;
        return t;
    }

private:
    friend class trie_builder;

    tree_type v4_{ip_family::v4};
    tree_type v6_{ip_family::v6};
    std::optional<day> newest_v4_;
    std::optional<day> newest_v6_;
};

/// Replays daily pfx2as snapshots, strictly in date order per family, into a
/// temporal_trie. Lines of the same day are buffered so that duplicate lines for
/// one prefix union their origins regardless of order.
class trie_builder {
public:
    /// Declares that a snapshot for `d` exists, even if it contributes no lines.
    void begin_day(ip_family f, day d) {
        auto& st = state(f);
        if (st.current && d < *st.current)
            throw build_error("snapshot " + d.str() + " replayed after " + st.current->str());
        if (st.current && d == *st.current)
            return;
        flush(f);
        st.current = d;
    }

    /// Adds one accepted announcement for its snapshot date.
    void insert_day(const pfx2as_line& line) {
        const auto f = line.prefix.family();
        begin_day(f, line.snapshot_date);
        auto& st = state(f);
        auto& t = f == ip_family::v4 ? trie_.v4_ : trie_.v6_;
        const auto idx = t.insert(line.prefix);
        if (static_cast<std::size_t>(idx) >= st.pending.size())
            st.pending.resize(static_cast<std::size_t>(idx) + 1);
        auto& p = st.pending[static_cast<std::size_t>(idx)];
        if (!p.active) {
            p.active = true;
            st.touched.push_back(idx);
        }
        p.asns.insert(p.asns.end(), line.origins.asns.begin(), line.origins.asns.end());
        p.saw_set = p.saw_set || line.origins.kind == origin_kind::as_set;
    }

    /// Marks special-use prefixes; they answer as reserved and never carry epochs.
    void seed_reserved(const std::vector<reserved_prefix>& registry) {
        for (const auto& r : registry) {
            auto& rec = (r.prefix.family() == ip_family::v4 ? trie_.v4_ : trie_.v6_)[r.prefix];
            rec.reserved_label = r.label;
            rec.epochs.clear();
        }
    }

    /// Seals the trie. Epochs last seen on their family's newest snapshot become open-ended.
    temporal_trie finalize() && {
        flush(ip_family::v4);
        flush(ip_family::v6);
        trie_.newest_v4_ = v4_state_.current;
        trie_.newest_v6_ = v6_state_.current;
        open_newest(trie_.v4_, v4_state_.current);
        open_newest(trie_.v6_, v6_state_.current);
        return std::move(trie_);
    }

private:
    struct pending_entry {
        bool active = false;
        bool saw_set = false;
        std::vector<asn_t> asns;
    };

    struct family_state {
        std::optional<day> current;
        std::vector<pending_entry> pending;
        std::vector<temporal_trie::tree_type::index_type> touched;
    };

    family_state& state(ip_family f) { return f == ip_family::v4 ? v4_state_ : v6_state_; }

    void flush(ip_family f) {
        auto& st = state(f);
        if (!st.current)
            return;
        const day d = *st.current;
        auto& t = f == ip_family::v4 ? trie_.v4_ : trie_.v6_;
        std::sort(st.touched.begin(), st.touched.end());
        for (auto idx : st.touched) {
            auto& p = st.pending[static_cast<std::size_t>(idx)];
            auto& rec = t.value_at(idx);
            std::sort(p.asns.begin(), p.asns.end());
            p.asns.erase(std::unique(p.asns.begin(), p.asns.end()), p.asns.end());
            if (!rec.reserved_label) {
                if (!rec.epochs.empty() && rec.epochs.back().origin_asns == p.asns &&
                    rec.epochs.back().last_seen == d.prev()) {
                    rec.epochs.back().last_seen = d;
                } else {
                    const auto kind = p.saw_set ? origin_kind::as_set
                                      : p.asns.size() > 1 ? origin_kind::moas
                                                          : origin_kind::single;
                    rec.epochs.push_back({d, d, p.asns, kind});
                }
            }
            p = pending_entry{};
        }
        st.touched.clear();
    }

    static void open_newest(temporal_trie::tree_type& t, std::optional<day> newest) {
        if (!newest)
            return;
        for (std::size_t i = 0; i < t.size(); ++i) {
            auto& rec = t.value_at(static_cast<temporal_trie::tree_type::index_type>(i));
            if (!rec.epochs.empty() && rec.epochs.back().last_seen == newest)
                rec.epochs.back().last_seen.reset();
        }
    }

    temporal_trie trie_;
    family_state v4_state_;
    family_state v6_state_;
};

} // namespace histwhois
