#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sxsm::sip {

class UriError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class HostKind { Domain, Ipv4, Invalid };

HostKind classify_host(std::string_view host);

/// A SIP URI reduced to the parts the lab manipulates. Anything after
/// host[:port] (uri-parameters, headers) is kept verbatim in `params` so
/// that request-lines survive a parse/serialize round trip.
struct SipUri {
    std::string scheme = "sip";
    std::string user;
    std::string host;
    std::optional<std::uint16_t> port;
    std::string params;

    static SipUri parse(std::string_view text);
    static std::optional<SipUri> try_parse(std::string_view text);

    std::string str() const;

    /// user@host, lower-cased host; the key every store uses for identities.
    std::string identity() const;

    HostKind host_kind() const { return classify_host(host); }

    /// Temporary URIs carry an IP literal in the host part.
    bool is_temporary() const { return host_kind() == HostKind::Ipv4; }
    bool is_permanent() const { return host_kind() == HostKind::Domain; }

    friend bool operator==(const SipUri&, const SipUri&) = default;
};

/// Pulls the URI out of a name-addr / addr-spec header value such as
/// `Alice <sip:alice@example.com>;tag=1` or `sip:bob@example.com;tag=2`.
std::optional<SipUri> uri_from_header_value(std::string_view value);

}  // namespace sxsm::sip
