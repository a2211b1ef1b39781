#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "sxsm/defenses/fingerprint_db.hpp"
#include "sxsm/scenario/scenario.hpp"

namespace sxsm::attacks {

class IncompatibleFingerprint : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Headers every request of a call needs; a layout without one of them
/// cannot carry the attack.
const std::vector<std::string>& required_headers();

/// "call-id" -> "Call-ID", "max-forwards" -> "Max-Forwards".
std::string canonical_header_name(const std::string& lower);

/// Rewrites the header block of a request template so that its layout is
/// `names` (in the given case). Headers the template lacks get plausible
/// values, extra headers are dropped. A template that already has the
/// layout is returned unchanged. Throws IncompatibleFingerprint.
scenario::MessageTemplate reorder_template(const scenario::MessageTemplate& tmpl, const std::vector<std::string>& names,
                                           const std::string& user_agent = "SIP Phone");

/// Imitates a device: every request template of `method` takes the layout
/// of `fingerprint`, and every recv group also answers OPTIONS probes as
/// `behavior` says (no response for status 0). Spoofing twice changes
/// nothing.
scenario::Bundle spoof_device(scenario::Bundle bundle, const sip::HeaderFingerprint& fingerprint,
                              const std::vector<defenses::BehaviorRow>& behavior = {},
                              const std::string& method = "INVITE");

/// Same with every layout and the behavior of a database device.
scenario::Bundle spoof_device(scenario::Bundle bundle, const defenses::DeviceProfile& device);

}  // namespace sxsm::attacks
