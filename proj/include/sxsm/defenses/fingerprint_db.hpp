#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sxsm/defenses/verdict.hpp"
#include "sxsm/sip/fingerprint.hpp"

namespace sxsm::defenses {

class FingerprintDbError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Probe classes of the active fingerprinting probe set.
inline constexpr const char* kCompliantProbe = "compliant";
inline constexpr const char* kMalformedProbe = "malformed";

/// Expected reaction of a device to one probe. Status 0 stands for "no
/// answer before the timeout".
struct BehaviorRow {
    std::string probe;
    int status = 0;
    /// Selected response headers and their exact values.
    std::vector<std::pair<std::string, std::string>> headers;
};

struct DeviceProfile {
    std::string label;
    /// Method -> header layout. Names keep the case of the db file.
    std::map<std::string, std::vector<std::string>> layouts;
    std::vector<BehaviorRow> behavior;

    sip::HeaderFingerprint fingerprint(const std::string& method) const;
    const BehaviorRow* behavior_for(const std::string& probe) const;
};

/// What a probed endpoint answered to one probe; no response means timeout.
struct ProbeObservation {
    std::string probe;
    std::optional<sip::SipMessage> response;
};

struct FingerprintDb {
    std::vector<DeviceProfile> devices;
    /// Passive check of a method nobody in the db has a layout for.
    bool forward_unknown_method = true;

    /// Labels unique, every device has a layout and behavior for both
    /// probe classes.
    void validate() const;

    /// Probe classes in the order they are sent.
    std::vector<std::string> probes() const;

    const DeviceProfile& device(const std::string& label) const;
    /// Device whose layout for the message's method matches exactly.
    const DeviceProfile* match_layout(const sip::SipMessage& msg) const;
    /// Device whose behavior rows all match the observations.
    const DeviceProfile* match_behavior(const std::vector<ProbeObservation>& observations) const;
    bool knows_method(const std::string& method) const;
};

/// Forward iff the header layout equals a stored one; else Reject(403).
Verdict passive_check(const sip::SipMessage& msg, const FingerprintDb& db);

/// Forward iff the observations equal some device's behavior rows.
Verdict active_verdict(const std::vector<ProbeObservation>& observations, const FingerprintDb& db);

FingerprintDb parse_fingerprint_db(std::string_view xml);
FingerprintDb load_fingerprint_db(const std::filesystem::path& path);

}  // namespace sxsm::defenses
