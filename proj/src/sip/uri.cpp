#include "sxsm/sip/uri.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace sxsm::sip {

namespace {

bool is_domain_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_';
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

HostKind classify_host(std::string_view host) {
    if (host.empty()) return HostKind::Invalid;

    int octets = 0;
    bool all_numeric = true;
    std::size_t start = 0;
    while (start <= host.size()) {
        auto dot = host.find('.', start);
        auto part = host.substr(start, dot == std::string_view::npos ? host.npos : dot - start);
        if (part.empty() || part.size() > 3 ||
            !std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            all_numeric = false;
            break;
        }
        int value = 0;
        std::from_chars(part.data(), part.data() + part.size(), value);
        if (value > 255) {
            all_numeric = false;
            break;
        }
        ++octets;
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    if (all_numeric && octets == 4) return HostKind::Ipv4;

    if (!std::all_of(host.begin(), host.end(), is_domain_char)) return HostKind::Invalid;
    if (host.front() == '.' || host.back() == '.' || host.find("..") != host.npos) return HostKind::Invalid;
    // all-digit dotted strings that are not valid quads are not domains either
    if (std::all_of(host.begin(), host.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '.'; }))
        return HostKind::Invalid;
    return HostKind::Domain;
}

std::optional<SipUri> SipUri::try_parse(std::string_view text) {
    SipUri uri;
    auto colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0) return std::nullopt;
    uri.scheme = std::string(text.substr(0, colon));
    auto scheme = lower(uri.scheme);
    if (scheme != "sip" && scheme != "sips") return std::nullopt;

    auto rest = text.substr(colon + 1);
    auto param_start = rest.find_first_of(";?");
    auto hostpart = rest.substr(0, param_start);
    if (param_start != std::string_view::npos) uri.params = std::string(rest.substr(param_start));

    auto at = hostpart.rfind('@');
    if (at != std::string_view::npos) {
        uri.user = std::string(hostpart.substr(0, at));
        hostpart = hostpart.substr(at + 1);
    }
    auto port_colon = hostpart.rfind(':');
    if (port_colon != std::string_view::npos) {
        auto port_text = hostpart.substr(port_colon + 1);
        unsigned port = 0;
        auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
        if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port == 0 || port > 65535)
            return std::nullopt;
        uri.port = static_cast<std::uint16_t>(port);
        hostpart = hostpart.substr(0, port_colon);
    }
    if (hostpart.empty()) return std::nullopt;
    uri.host = std::string(hostpart);
    if (classify_host(uri.host) == HostKind::Invalid) return std::nullopt;
    return uri;
}

SipUri SipUri::parse(std::string_view text) {
    auto uri = try_parse(text);
    if (!uri) throw UriError("invalid SIP URI: " + std::string(text));
    return *uri;
}

std::string SipUri::str() const {
    std::string out = scheme + ":";
    if (!user.empty()) out += user + "@";
    out += host;
    if (port) out += ":" + std::to_string(*port);
    out += params;
    return out;
}

std::string SipUri::identity() const { return user + "@" + lower(host); }

std::optional<SipUri> uri_from_header_value(std::string_view value) {
    auto lt = value.find('<');
    if (lt != std::string_view::npos) {
        auto gt = value.find('>', lt);
        if (gt == std::string_view::npos) return std::nullopt;
        return SipUri::try_parse(value.substr(lt + 1, gt - lt - 1));
    }
    auto begin = value.find_first_not_of(" \t");
    if (begin == std::string_view::npos) return std::nullopt;
    value = value.substr(begin);
    // addr-spec form: header parameters start at the first ';' after the URI
    auto end = value.find_first_of("; \t");
    return SipUri::try_parse(value.substr(0, end));
}

}  // namespace sxsm::sip
