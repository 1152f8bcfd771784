#pragma once

#include <arpa/inet.h>

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace histwhois {

enum class ip_family : std::uint8_t { v4 = 4, v6 = 6 };

constexpr unsigned address_bits(ip_family f) { return f == ip_family::v4 ? 32u : 128u; }

/// An IPv4 or IPv6 address in network byte order. IPv4 uses the first four bytes.
struct ip_address {
    ip_family family = ip_family::v4;
    std::array<std::uint8_t, 16> bytes{};

    constexpr unsigned bits() const { return address_bits(family); }

    constexpr bool bit(unsigned i) const { return (bytes[i / 8] >> (7 - i % 8)) & 1u; }

    constexpr void set_bit(unsigned i, bool v) {
        const auto mask = static_cast<std::uint8_t>(1u << (7 - i % 8));
        if (v)
            bytes[i / 8] |= mask;
        else
            bytes[i / 8] &= static_cast<std::uint8_t>(~mask);
    }

    /// Zeroes every bit at position >= len.
    constexpr ip_address masked(unsigned len) const {
        ip_address r = *this;
        for (unsigned i = len; i < 128; ++i)
            r.set_bit(i, false);
        return r;
    }

    static ip_address v4(std::uint32_t host_order) {
        ip_address a;
        a.family = ip_family::v4;
        a.bytes[0] = static_cast<std::uint8_t>(host_order >> 24);
        a.bytes[1] = static_cast<std::uint8_t>(host_order >> 16);
        a.bytes[2] = static_cast<std::uint8_t>(host_order >> 8);
        a.bytes[3] = static_cast<std::uint8_t>(host_order);
        return a;
    }

    std::uint32_t v4_value() const {
        return (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) | (std::uint32_t{bytes[2]} << 8) |
               std::uint32_t{bytes[3]};
    }

    static std::optional<ip_address> parse(std::string_view s) {
        if (s.empty() || s.size() > INET6_ADDRSTRLEN)
            return std::nullopt;
        const std::string buf(s);
        ip_address a;
        if (buf.find(':') == std::string::npos) {
            a.family = ip_family::v4;
            if (inet_pton(AF_INET, buf.c_str(), a.bytes.data()) != 1)
                return std::nullopt;
        } else {
            a.family = ip_family::v6;
            if (inet_pton(AF_INET6, buf.c_str(), a.bytes.data()) != 1)
                return std::nullopt;
        }
        return a;
    }

    std::string str() const {
        char buf[INET6_ADDRSTRLEN] = {};
        inet_ntop(family == ip_family::v4 ? AF_INET : AF_INET6, bytes.data(), buf, sizeof buf);
        return buf;
    }

    constexpr auto operator<=>(const ip_address&) const = default;
};

/// A network prefix. The base address always has its host bits cleared.
struct ip_prefix {
    ip_address base;
    unsigned length = 0;

    ip_prefix() = default;
    ip_prefix(const ip_address& addr, unsigned len) : base(addr.masked(len)), length(len) {
        if (len > addr.bits())
            throw std::invalid_argument("prefix length exceeds address width");
    }

    ip_family family() const { return base.family; }

    bool contains(const ip_address& a) const {
        if (a.family != base.family)
            return false;
        for (unsigned i = 0; i < length; ++i)
            if (a.bit(i) != base.bit(i))
                return false;
        return true;
    }

    bool contains(const ip_prefix& p) const { return p.length >= length && contains(p.base); }

    /// Accepts "a.b.c.d/n", "x::/n", or a bare address (host prefix).
    static std::optional<ip_prefix> parse(std::string_view s) {
        const auto slash = s.find('/');
        auto addr = ip_address::parse(s.substr(0, slash));
        if (!addr)
            return std::nullopt;
        if (slash == std::string_view::npos)
            return ip_prefix{*addr, addr->bits()};
        const auto len_text = s.substr(slash + 1);
        if (len_text.empty() || len_text.size() > 3)
            return std::nullopt;
        unsigned len = 0;
        for (char c : len_text) {
            if (c < '0' || c > '9')
                return std::nullopt;
            len = len * 10 + static_cast<unsigned>(c - '0');
        }
        if (len > addr->bits())
            return std::nullopt;
        return ip_prefix{*addr, len};
    }

    std::string str() const { return base.str() + "/" + std::to_string(length); }

    auto operator<=>(const ip_prefix&) const = default;
};

} // namespace histwhois
