#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "histwhois/ip.hpp"

namespace histwhois {

namespace detail {

/// Number of leading bits `a` and `b` share, capped at `limit`.
inline unsigned common_prefix_length(const ip_address& a, const ip_address& b, unsigned limit) {
    unsigned n = 0;
    for (unsigned i = 0; i < 16 && n < limit; ++i) {
        const auto x = static_cast<std::uint8_t>(a.bytes[i] ^ b.bytes[i]);
        if (x != 0) {
            n += static_cast<unsigned>(std::countl_zero(x));
            break;
        }
        n += 8;
    }
    return n < limit ? n : limit;
}

inline bool prefix_matches(const ip_address& key, const ip_address& a, unsigned len) {
    return common_prefix_length(key, a, len) == len;
}

} // namespace detail

/// Path-compressed binary trie (Patricia tree) mapping prefixes of one address
/// family to values of type T. Nodes and values live in flat arrays; a node is
/// either a stored prefix or a branching point with two children.
template <typename T>
class prefix_tree {
public:
    using index_type = std::int32_t;
    static constexpr index_type npos = -1;

    /// Values stored on the path to an address, least specific first.
    struct path_result {
        std::array<index_type, 129> items{};
        unsigned size = 0;
    };

    explicit prefix_tree(ip_family family = ip_family::v4) : family_(family) {
        nodes_.push_back(node{ip_address{family, {}}, 0, {npos, npos}, npos});
    }

    ip_family family() const { return family_; }

    /// Number of stored prefixes.
    std::size_t size() const { return values_.size(); }

    /// Nodes in use; an unused branch-less root is not counted.
    std::size_t node_count() const {
        const auto& r = nodes_[0];
        const int root_children = (r.child[0] != npos) + (r.child[1] != npos);
        return nodes_.size() - (r.value == npos && root_children < 2 ? 1 : 0);
    }

    /// Returns the value stored at `p`, default-constructing it when absent.
    T& operator[](const ip_prefix& p) { return values_[static_cast<std::size_t>(insert_node(p))].second; }

    /// Like operator[], but yields the stable value index.
    index_type insert(const ip_prefix& p) { return insert_node(p); }

    const T* find(const ip_prefix& p) const {
        check_family(p.family());
        index_type cur = 0;
        for (;;) {
            const node& n = nodes_[static_cast<std::size_t>(cur)];
            if (n.len == p.length)
                return n.value == npos ? nullptr : &values_[static_cast<std::size_t>(n.value)].second;
            cur = n.child[p.base.bit(n.len)];
            if (cur == npos)
                return nullptr;
            const node& next = nodes_[static_cast<std::size_t>(cur)];
            if (next.len > p.length || !detail::prefix_matches(next.key, p.base, next.len))
                return nullptr;
        }
    }

    /// Stored prefixes containing `a` with length <= max_len, least specific first.
    path_result path(const ip_address& a, unsigned max_len) const {
        path_result out;
        if (a.family != family_)
            return out;
        index_type cur = 0;
        while (cur != npos) {
            const node& n = nodes_[static_cast<std::size_t>(cur)];
            if (n.len > max_len || !detail::prefix_matches(n.key, a, n.len))
                break;
            if (n.value != npos)
                out.items[out.size++] = n.value;
            if (n.len >= max_len || n.len >= a.bits())
                break;
            cur = n.child[a.bit(n.len)];
        }
        return out;
    }

    const ip_prefix& prefix_at(index_type value_index) const {
        return values_[static_cast<std::size_t>(value_index)].first;
    }
    const T& value_at(index_type value_index) const { return values_[static_cast<std::size_t>(value_index)].second; }
    T& value_at(index_type value_index) { return values_[static_cast<std::size_t>(value_index)].second; }

    /// Visits every stored (prefix, value) in address order, shorter prefixes first.
    template <typename F>
    void for_each(F&& f) const {
        visit(0, f);
    }

    /// Visits every stored prefix contained in `within`, in address order.
    template <typename F>
    void for_each_within(const ip_prefix& within, F&& f) const {
        if (within.family() != family_)
            return;
        index_type cur = 0;
        while (cur != npos) {
            const node& n = nodes_[static_cast<std::size_t>(cur)];
            const unsigned common = detail::common_prefix_length(n.key, within.base, std::min(n.len, within.length));
            if (common < std::min(n.len, within.length))
                return;
            if (n.len >= within.length) {
                visit(cur, f);
                return;
            }
            cur = n.child[within.base.bit(n.len)];
        }
    }

private:
    struct node {
        ip_address key; // masked to len
        unsigned len;
        index_type child[2];
        index_type value;
    };

    void check_family(ip_family f) const {
        if (f != family_)
            throw std::invalid_argument("address family mismatch");
    }

    index_type new_node(const ip_address& key, unsigned len) {
        nodes_.push_back(node{key.masked(len), len, {npos, npos}, npos});
        return static_cast<index_type>(nodes_.size() - 1);
    }

    index_type attach_value(index_type node_index, const ip_prefix& p) {
        auto& n = nodes_[static_cast<std::size_t>(node_index)];
        if (n.value == npos) {
            values_.emplace_back(p, T{});
            n.value = static_cast<index_type>(values_.size() - 1);
        }
        return n.value;
    }

    index_type insert_node(const ip_prefix& p) {
        check_family(p.family());
        index_type cur = 0;
        for (;;) {
            if (nodes_[static_cast<std::size_t>(cur)].len == p.length)
                return attach_value(cur, p);
            const bool b = p.base.bit(nodes_[static_cast<std::size_t>(cur)].len);
            const index_type next = nodes_[static_cast<std::size_t>(cur)].child[b];
            if (next == npos) {
                const index_type leaf = new_node(p.base, p.length);
                nodes_[static_cast<std::size_t>(cur)].child[b] = leaf;
                return attach_value(leaf, p);
            }
            const node nx = nodes_[static_cast<std::size_t>(next)];
            const unsigned common = detail::common_prefix_length(nx.key, p.base, std::min(nx.len, p.length));
            if (common == nx.len) {
                cur = next;
                continue;
            }
            if (common == p.length) {
                const index_type mid = new_node(p.base, p.length);
                nodes_[static_cast<std::size_t>(mid)].child[nx.key.bit(p.length)] = next;
                nodes_[static_cast<std::size_t>(cur)].child[b] = mid;
                return attach_value(mid, p);
            }
            const index_type glue = new_node(p.base, common);
            const index_type leaf = new_node(p.base, p.length);
            nodes_[static_cast<std::size_t>(glue)].child[p.base.bit(common)] = leaf;
            nodes_[static_cast<std::size_t>(glue)].child[nx.key.bit(common)] = next;
            nodes_[static_cast<std::size_t>(cur)].child[b] = glue;
            return attach_value(leaf, p);
        }
    }

    template <typename F>
    void visit(index_type start, F& f) const {
        std::vector<index_type> stack{start};
        while (!stack.empty()) {
            const index_type i = stack.back();
            stack.pop_back();
            const node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.value != npos) {
                const auto& [prefix, value] = values_[static_cast<std::size_t>(n.value)];
                f(prefix, value);
            }
            if (n.child[1] != npos)
                stack.push_back(n.child[1]);
            if (n.child[0] != npos)
                stack.push_back(n.child[0]);
        }
    }

    ip_family family_;
    std::vector<node> nodes_;
    std::vector<std::pair<ip_prefix, T>> values_;
};

} // namespace histwhois
