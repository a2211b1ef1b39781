#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sxsm/attacks/inventory.hpp"
#include "sxsm/attacks/stock.hpp"
#include "sxsm/engine/engine.hpp"

namespace sxsm::attacks {

/// Candidate user parts: prefix followed by a zero-padded number in
/// [first, last].
struct UserRange {
    std::string prefix;
    int digits = 4;
    std::int64_t first = 0;
    std::int64_t last = -1;

    /// "5550000-5559999" or "555xxxx". Throws InventoryError.
    static UserRange parse(std::string_view text);
    std::int64_t size() const { return last < first ? 0 : last - first + 1; }
    std::vector<std::string> users() const;
};

/// IPv4 addresses, inclusive.
struct IpRange {
    std::uint32_t first = 0;
    std::uint32_t last = 0;

    /// "192.0.2.5-192.0.2.155", "192.0.2.0/28" (host addresses only) or a
    /// single address. Throws InventoryError.
    static IpRange parse(std::string_view text);
    std::vector<std::string> addresses() const;
};

struct ScanOptions {
    engine::Rate rate = engine::Rate::per_second(50);
    /// Identity the probes claim.
    std::string scanner_uri = "sip:scanner@scan.example";
    /// User part of temporary-URI probes.
    std::string temporary_user = "user";
    net::TimeMs recv_timeout_ms = 4'000;
    engine::EngineOptions engine;
};

/// Status a probe call observed: its first response other than 100.
sip::UriStatus classify_call(const engine::CallSummary& call);

/// Probes user@domain for every candidate through `proxy`.
UriInventory scan_permanent(const std::string& domain, const UserRange& users, ProbeMethod probe,
                            net::Transport& transport, const net::Address& proxy, const ScanOptions& options = {});

/// Probes every address of `ips` directly on `port`. REGISTER is not a
/// valid probe here.
UriInventory scan_temporary(const IpRange& ips, std::uint16_t port, ProbeMethod probe, net::Transport& transport,
                            const ScanOptions& options = {});

}  // namespace sxsm::attacks
