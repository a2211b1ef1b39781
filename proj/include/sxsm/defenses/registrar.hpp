#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sxsm/net/transport.hpp"

namespace sxsm::defenses {

using net::TimeMs;

/// Identity -> contact bindings with their history. The latest REGISTER
/// wins.
class Registrar {
public:
    struct Change {
        TimeMs time = 0;
        std::string identity;
        /// nullopt: binding removed.
        std::optional<net::Address> contact;
    };

    void bind(const std::string& identity, const net::Address& contact, TimeMs expires_ms, TimeMs now);
    void unbind(const std::string& identity, TimeMs now);
    std::optional<net::Address> lookup(const std::string& identity, TimeMs now) const;

    std::vector<Change> timeline(const std::string& identity) const;

    /// Fraction of [from, to) during which `identity` was bound to `contact`
    /// (expiry included).
    double binding_share(const std::string& identity, const net::Address& contact, TimeMs from, TimeMs to) const;

private:
    struct Binding {
        net::Address contact;
        TimeMs bound_at = 0;
        TimeMs expires_at = 0;
    };
    mutable std::mutex mutex_;
    std::map<std::string, Binding> bindings_;
    std::map<std::string, std::vector<Binding>> history_;
    std::vector<Change> changes_;
};

}  // namespace sxsm::defenses
