#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sxsm/sip/message.hpp"

namespace sxsm::sip {

/// Ordered, lower-cased header names of a message. Compact forms are kept
/// literally: "v" and "via" are different layouts.
struct HeaderFingerprint {
    std::vector<std::string> header_names;
    std::string label;

    /// Label is not part of the layout.
    bool same_layout(const HeaderFingerprint& other) const { return header_names == other.header_names; }

    std::string str() const;
    static HeaderFingerprint from_names(const std::vector<std::string>& names, std::string label = {});

    friend bool operator==(const HeaderFingerprint&, const HeaderFingerprint&) = default;
};

HeaderFingerprint fingerprint_of(const SipMessage& msg);

enum class UriStatus { Unassigned, AssignedOffline, AssignedOnline, Indeterminate };

std::string_view to_string(UriStatus status);
UriStatus uri_status_from_string(std::string_view text);
inline bool is_assigned(UriStatus s) { return s == UriStatus::AssignedOffline || s == UriStatus::AssignedOnline; }

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// 404 -> Unassigned, 480 -> AssignedOffline, 180/200 -> AssignedOnline,
/// everything else in 100..699 -> Indeterminate.
UriStatus classify_response(int status);

}  // namespace sxsm::sip
