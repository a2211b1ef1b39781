#include "sxsm/sip/fingerprint.hpp"

#include <algorithm>
#include <cctype>

namespace sxsm::sip {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::string HeaderFingerprint::str() const {
    std::string out;
    for (const auto& n : header_names) {
        if (!out.empty()) out += ',';
        out += n;
    }
    return out;
}

HeaderFingerprint HeaderFingerprint::from_names(const std::vector<std::string>& names, std::string label) {
    HeaderFingerprint fp;
    fp.label = std::move(label);
    fp.header_names.reserve(names.size());
    for (const auto& n : names) fp.header_names.push_back(lower(n));
    return fp;
}

HeaderFingerprint fingerprint_of(const SipMessage& msg) {
    HeaderFingerprint fp;
    fp.header_names.reserve(msg.headers.size());
    for (const auto& h : msg.headers) fp.header_names.push_back(lower(h.name));
    return fp;
}

std::string_view to_string(UriStatus status) {
    switch (status) {
    case UriStatus::Unassigned: return "unassigned";
    case UriStatus::AssignedOffline: return "assigned-offline";
    case UriStatus::AssignedOnline: return "assigned-online";
    case UriStatus::Indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

UriStatus uri_status_from_string(std::string_view text) {
    for (auto s : {UriStatus::Unassigned, UriStatus::AssignedOffline, UriStatus::AssignedOnline,
                   UriStatus::Indeterminate})
        if (text == to_string(s)) return s;
    throw DomainError("unknown URI status: " + std::string(text));
}

UriStatus classify_response(int status) {
    if (status < 100 || status > 699) throw DomainError("status code out of range: " + std::to_string(status));
    switch (status) {
    case 404: return UriStatus::Unassigned;
    case 480: return UriStatus::AssignedOffline;
    case 180:
    case 200: return UriStatus::AssignedOnline;
    default: return UriStatus::Indeterminate;
    }
}

}  // namespace sxsm::sip
