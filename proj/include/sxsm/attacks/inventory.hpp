#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sxsm/net/event_loop.hpp"
#include "sxsm/sip/fingerprint.hpp"

namespace sxsm::attacks {

using net::TimeMs;

class InventoryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Temporary URIs are only worth trying for a day after they were seen.
inline constexpr TimeMs kTemporaryUriLifetimeMs = 24 * 3'600'000LL;

struct InventoryEntry {
    sip::SipUri uri;
    sip::UriStatus status = sip::UriStatus::Indeterminate;
    std::string probe;
    TimeMs observed_at = 0;
};

/// Scan result: one entry per probed URI.
class UriInventory {
public:
    /// Throws InventoryError on a duplicate URI.
    void add(InventoryEntry entry);
    const std::vector<InventoryEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const InventoryEntry* find(const std::string& uri) const;

    std::vector<InventoryEntry> assigned() const;
    std::vector<InventoryEntry> with_status(sip::UriStatus status) const;

    /// uri,status,probe,timestamp
    std::string to_csv() const;
    static UriInventory from_csv(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static UriInventory load(const std::filesystem::path& path);

private:
    std::vector<InventoryEntry> entries_;
};

bool is_stale(const InventoryEntry& entry, TimeMs now);

}  // namespace sxsm::attacks
