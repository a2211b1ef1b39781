#pragma once

#include <filesystem>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sxsm/net/event_loop.hpp"
#include "sxsm/sip/uri.hpp"

namespace sxsm::ids {

enum class Route { Normal, Honeypot };

class OverlappingSpace : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Identities (user@host) split into assigned accounts and decoys. Any
/// identity outside the assigned set routes to the honeypot.
struct HoneypotSpace {
    std::set<std::string> assigned;
    std::set<std::string> honeypot;

    /// Throws OverlappingSpace.
    void validate() const;
    Route route(const sip::SipUri& request_uri) const;
};

struct HoneypotRecord {
    net::TimeMs time_ms = 0;
    std::string source_uri;
    std::string source_addr;
    std::string method;
    std::string target_uri;

    friend bool operator==(const HoneypotRecord&, const HoneypotRecord&) = default;
};

class HoneypotLog {
public:
    void append(HoneypotRecord record);
    std::vector<HoneypotRecord> records() const;
    std::size_t size() const;
    /// Distinct source identities seen.
    std::set<std::string> sources() const;
    bool contains_source(const std::string& identity) const;

    /// `timestamp,source_uri,source_addr,method,target_uri` with a header
    /// row; timestamp in seconds with millisecond precision.
    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;

private:
    mutable std::mutex mutex_;
    std::vector<HoneypotRecord> records_;
};

}  // namespace sxsm::ids
