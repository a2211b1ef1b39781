#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sxsm/sip/uri.hpp"

namespace sxsm::sip {

struct Header {
    std::string name;
    std::string value;
    /// Bytes between name and value as seen on the wire (": " by default).
    std::string separator = ": ";

    friend bool operator==(const Header&, const Header&) = default;
};

struct RequestLine {
    std::string method;
    SipUri uri;
    friend bool operator==(const RequestLine&, const RequestLine&) = default;
};

struct StatusLine {
    int status = 200;
    std::string reason;
    friend bool operator==(const StatusLine&, const StatusLine&) = default;
};

bool iequals(std::string_view a, std::string_view b);

/// Long header name for a compact alias ("v" -> "Via"), or the input.
std::string_view expand_compact(std::string_view name);

/// SIP request or response. Headers keep wire order and duplicates.
struct SipMessage {
    std::variant<RequestLine, StatusLine> start;
    std::vector<Header> headers;
    std::string body;

    static SipMessage request(std::string method, SipUri uri) {
        return SipMessage{RequestLine{std::move(method), std::move(uri)}, {}, {}};
    }
    static SipMessage response(int status, std::string reason) {
        return SipMessage{StatusLine{status, std::move(reason)}, {}, {}};
    }

    bool is_request() const { return std::holds_alternative<RequestLine>(start); }
    bool is_response() const { return !is_request(); }

    /// Empty for responses.
    std::string_view method() const;
    /// 0 for requests.
    int status() const;
    const SipUri* request_uri() const;
    std::string start_line() const;

    /// First header matching `name` case-insensitively, compact aliases included.
    std::optional<std::string_view> header(std::string_view name) const;
    std::vector<std::string_view> headers_named(std::string_view name) const;
    bool has_header(std::string_view name) const { return header(name).has_value(); }

    SipMessage& add_header(std::string name, std::string value);
    /// Replaces the first matching header in place, or appends.
    SipMessage& set_header(std::string name, std::string value);
    std::size_t remove_headers(std::string_view name);

    std::string call_id() const;
    /// Method named in the CSeq header, e.g. "INVITE" for "1 INVITE".
    std::string cseq_method() const;
    std::optional<SipUri> from_uri() const;
    std::optional<SipUri> to_uri() const;
    std::optional<SipUri> contact_uri() const;

    friend bool operator==(const SipMessage&, const SipMessage&) = default;
};

enum class ParseErrorKind { MalformedStartLine, MalformedHeader, BodyLengthMismatch };

/// Raised by parse(). `line` is 1-based; `offset`/`length` give the byte span.
class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorKind kind, std::size_t line, std::size_t offset, std::size_t length,
               const std::string& what);

    ParseErrorKind kind() const { return kind_; }
    std::size_t line() const { return line_; }
    std::size_t offset() const { return offset_; }
    std::size_t length() const { return length_; }

private:
    ParseErrorKind kind_;
    std::size_t line_;
    std::size_t offset_;
    std::size_t length_;
};

std::string_view to_string(ParseErrorKind kind);

/// Permissive parse of one complete message. Accepts bare LF terminators.
SipMessage parse(std::string_view raw);

/// Start-line, headers in stored order, blank line, body. Line terminators
/// are always CRLF; Content-Length is appended when a body is present and
/// no Content-Length header exists.
std::string serialize(const SipMessage& msg);

/// Names of the mandatory request headers the message lacks; empty for
/// responses and for compliant requests.
std::vector<std::string> strict_violations(const SipMessage& msg);
inline bool is_strictly_valid(const SipMessage& msg) { return strict_violations(msg).empty(); }

}  // namespace sxsm::sip
