#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "histwhois/asn.hpp"
#include "histwhois/day.hpp"
#include "histwhois/ingest.hpp"

namespace histwhois {

/// A value valid over [valid_from, valid_to]; an empty valid_to means "still current".
template <typename Value>
struct timed_value {
    day valid_from;
    std::optional<day> valid_to;
    Value value;
    bool change_guessed = false; ///< valid_from interpolated between two snapshots
    std::vector<day> seen;       ///< snapshot dates that observed this value

    bool covers(day d) const { return d >= valid_from && (!valid_to || d <= *valid_to); }
    bool operator==(const timed_value&) const = default;
};

/// Turns a date-ordered sequence of sparse snapshots into per-key timelines.
///
/// Between adjacent snapshots d1 < d2:
///  - same value in both: one epoch spanning both.
///  - key gone at d2: epoch ends at d1.
///  - key new at d2: epoch starts at d2.
///  - value differs: old epoch ends at d1, new one starts at d1 + 1 and is marked guessed.
/// Epochs still open after the last snapshot keep an empty valid_to.
template <typename Key, typename Value>
std::map<Key, std::vector<timed_value<Value>>>
interpolate_snapshots(const std::vector<std::pair<day, std::map<Key, Value>>>& snapshots) {
    std::map<Key, std::vector<timed_value<Value>>> out;
    std::set<Key> open;
    std::optional<day> previous;
    for (const auto& [date, entries] : snapshots) {
        if (previous && date <= *previous)
            throw std::invalid_argument("snapshots must be strictly ascending by date");
        for (const auto& key : open)
            if (!entries.contains(key))
                out[key].back().valid_to = *previous;

        std::set<Key> now_open;
        for (const auto& [key, value] : entries) {
            auto& epochs = out[key];
            if (open.contains(key)) {
                auto& current = epochs.back();
                if (current.value == value) {
                    current.seen.push_back(date);
                } else {
                    current.valid_to = *previous;
                    epochs.push_back({previous->next(), std::nullopt, value, true, {date}});
                }
            } else {
                epochs.push_back({date, std::nullopt, value, false, {date}});
            }
            now_open.insert(key);
        }
        open = std::move(now_open);
        previous = date;
    }
    return out;
}

struct organization {
    std::string org_id;
    std::string org_name;
    std::string country;
    std::set<std::string> sources;

    bool operator==(const organization&) const = default;
};

/// What one AS2ORG snapshot says about one ASN.
struct as_mapping {
    std::string as_name;
    std::string source;
    std::string opaque_id;
    std::vector<std::string> org_ids; ///< sorted, unique

    /// opaque_id is carried along but does not distinguish mappings.
    bool operator==(const as_mapping& o) const {
        return as_name == o.as_name && source == o.source && org_ids == o.org_ids;
    }
};

using as_org_epoch = timed_value<as_mapping>;
using org_epoch = timed_value<organization>;

template <typename Value>
const timed_value<Value>* find_covering(const std::vector<timed_value<Value>>& epochs, day d) {
    auto it = std::upper_bound(epochs.begin(), epochs.end(), d,
                               [](day v, const timed_value<Value>& e) { return v < e.valid_from; });
    if (it == epochs.begin())
        return nullptr;
    --it;
    return it->covers(d) ? &*it : nullptr;
}

struct org_resolution {
    std::string org_id;
    const org_epoch* epoch = nullptr; ///< null when the org_id is dangling at that date
};

struct as_org_resolution {
    asn_t asn = 0;
    const as_org_epoch* epoch = nullptr;
    std::vector<org_resolution> orgs;
};

/// Continuous ASN-to-organization mapping reconstructed from quarterly snapshots.
/// Immutable once built.
class as2org_timeline {
public:
    using as_map = std::map<asn_t, std::vector<as_org_epoch>>;
    using org_map = std::map<std::string, std::vector<org_epoch>>;

    as2org_timeline() = default;
    as2org_timeline(as_map as_epochs, org_map org_epochs)
        : as_epochs_(std::move(as_epochs)), org_epochs_(std::move(org_epochs)) {}

    static as2org_timeline build(const std::vector<as2org_snapshot>& snapshots) {
        if (snapshots.empty())
            throw std::invalid_argument("AS2ORG timeline needs at least one snapshot");

        std::vector<std::pair<day, std::map<asn_t, as_mapping>>> as_snaps;
        std::vector<std::pair<day, std::map<std::string, organization>>> org_snaps;
        for (const auto& snap : snapshots) {
            std::map<asn_t, as_mapping> ases;
            for (const auto& e : snap.as_entries) {
                auto [it, fresh] = ases.try_emplace(e.asn, as_mapping{e.as_name, e.source, e.opaque_id, {}});
                if (!e.org_id.empty())
                    it->second.org_ids.push_back(e.org_id);
            }
            for (auto& [asn, m] : ases) {
                std::sort(m.org_ids.begin(), m.org_ids.end());
                m.org_ids.erase(std::unique(m.org_ids.begin(), m.org_ids.end()), m.org_ids.end());
            }
            std::map<std::string, organization> orgs;
            for (const auto& o : snap.org_entries)
                orgs.try_emplace(o.org_id, organization{o.org_id, o.org_name, o.country, o.sources});
            as_snaps.emplace_back(snap.collection_date, std::move(ases));
            org_snaps.emplace_back(snap.collection_date, std::move(orgs));
        }
        return as2org_timeline{interpolate_snapshots(as_snaps), interpolate_snapshots(org_snaps)};
    }

    /// The mapping of `asn` valid at `date`, with each org_id resolved at the same date.
    std::optional<as_org_resolution> org_at(asn_t asn, day date) const {
        auto it = as_epochs_.find(asn);
        if (it == as_epochs_.end())
            return std::nullopt;
        const auto* epoch = find_covering(it->second, date);
        if (!epoch)
            return std::nullopt;
        as_org_resolution r{asn, epoch, {}};
        for (const auto& id : epoch->value.org_ids) {
            const org_epoch* org = nullptr;
            if (auto o = org_epochs_.find(id); o != org_epochs_.end()) {
                org = find_covering(o->second, date);
                // An org first listed alongside a guessed AS change: take it as of
                // the snapshot that showed the new mapping.
                if (!org) {
                    auto seen = std::lower_bound(epoch->seen.begin(), epoch->seen.end(), date);
                    if (seen != epoch->seen.end())
                        org = find_covering(o->second, *seen);
                }
            }
            r.orgs.push_back({id, org});
        }
        return r;
    }

    const std::vector<as_org_epoch>* epochs(asn_t asn) const {
        auto it = as_epochs_.find(asn);
        return it == as_epochs_.end() ? nullptr : &it->second;
    }

    const as_map& as_epochs() const { return as_epochs_; }
    const org_map& org_epochs() const { return org_epochs_; }
    std::size_t as_count() const { return as_epochs_.size(); }
    std::size_t org_count() const { return org_epochs_.size(); }

    bool operator==(const as2org_timeline&) const = default;

private:
    as_map as_epochs_;
    org_map org_epochs_;
};

} // namespace histwhois
