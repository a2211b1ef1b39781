#include "sxsm/sip/message.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <utility>

namespace sxsm::sip {

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 13> kCompact{{
    {"i", "Call-ID"},
    {"m", "Contact"},
    {"e", "Content-Encoding"},
    {"l", "Content-Length"},
    {"c", "Content-Type"},
    {"f", "From"},
    {"s", "Subject"},
    {"k", "Supported"},
    {"t", "To"},
    {"v", "Via"},
    {"o", "Event"},
    {"r", "Refer-To"},
    {"u", "Allow-Events"},
}};

bool is_token_char(char c) {
    if (std::isalnum(static_cast<unsigned char>(c))) return true;
    switch (c) {
    case '-': case '.': case '!': case '%': case '*': case '_':
    case '+': case '`': case '\'': case '~':
        return true;
    default:
        return false;
    }
}

bool is_token(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), is_token_char);
}

bool name_matches(std::string_view stored, std::string_view wanted) {
    return iequals(stored, wanted) || iequals(expand_compact(stored), wanted) ||
           iequals(stored, expand_compact(wanted));
}

std::string_view trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

struct Line {
    std::string_view text;  // without terminator
    std::size_t offset;
    std::size_t next;       // offset after terminator
};

std::optional<Line> next_line(std::string_view raw, std::size_t pos) {
    if (pos >= raw.size()) return std::nullopt;
    auto lf = raw.find('\n', pos);
    if (lf == std::string_view::npos) return Line{raw.substr(pos), pos, raw.size()};
    auto end = lf;
    if (end > pos && raw[end - 1] == '\r') --end;
    return Line{raw.substr(pos, end - pos), pos, lf + 1};
}

}  // namespace

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

std::string_view expand_compact(std::string_view name) {
    if (name.size() != 1) return name;
    for (const auto& [alias, full] : kCompact)
        if (iequals(alias, name)) return full;
    return name;
}

std::string_view SipMessage::method() const {
    if (auto* rl = std::get_if<RequestLine>(&start)) return rl->method;
    return {};
}

int SipMessage::status() const {
    if (auto* sl = std::get_if<StatusLine>(&start)) return sl->status;
    return 0;
}

const SipUri* SipMessage::request_uri() const {
    if (auto* rl = std::get_if<RequestLine>(&start)) return &rl->uri;
    return nullptr;
}

std::string SipMessage::start_line() const {
    if (auto* rl = std::get_if<RequestLine>(&start)) return rl->method + " " + rl->uri.str() + " SIP/2.0";
    const auto& sl = std::get<StatusLine>(start);
    return "SIP/2.0 " + std::to_string(sl.status) + " " + sl.reason;
}

std::optional<std::string_view> SipMessage::header(std::string_view name) const {
    for (const auto& h : headers)
        if (name_matches(h.name, name)) return std::string_view(h.value);
    return std::nullopt;
}

std::vector<std::string_view> SipMessage::headers_named(std::string_view name) const {
    std::vector<std::string_view> out;
    for (const auto& h : headers)
        if (name_matches(h.name, name)) out.emplace_back(h.value);
    return out;
}

SipMessage& SipMessage::add_header(std::string name, std::string value) {
    headers.push_back(Header{std::move(name), std::move(value)});
    return *this;
}

SipMessage& SipMessage::set_header(std::string name, std::string value) {
    for (auto& h : headers) {
        if (name_matches(h.name, name)) {
            h.value = std::move(value);
            return *this;
        }
    }
    return add_header(std::move(name), std::move(value));
}

std::size_t SipMessage::remove_headers(std::string_view name) {
    auto before = headers.size();
    std::erase_if(headers, [&](const Header& h) { return name_matches(h.name, name); });
    return before - headers.size();
}

std::string SipMessage::call_id() const {
    auto v = header("Call-ID");
    return v ? std::string(trim(*v)) : std::string{};
}

std::string SipMessage::cseq_method() const {
    auto v = header("CSeq");
    if (!v) return {};
    auto t = trim(*v);
    auto sp = t.find_first_of(" \t");
    if (sp == std::string_view::npos) return {};
    return std::string(trim(t.substr(sp)));
}

std::optional<SipUri> SipMessage::from_uri() const {
    auto v = header("From");
    return v ? uri_from_header_value(*v) : std::nullopt;
}

std::optional<SipUri> SipMessage::to_uri() const {
    auto v = header("To");
    return v ? uri_from_header_value(*v) : std::nullopt;
}

std::optional<SipUri> SipMessage::contact_uri() const {
    auto v = header("Contact");
    return v ? uri_from_header_value(*v) : std::nullopt;
}

ParseError::ParseError(ParseErrorKind kind, std::size_t line, std::size_t offset, std::size_t length,
                       const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + " at line " + std::to_string(line) + ": " + what),
      kind_(kind), line_(line), offset_(offset), length_(length) {}

std::string_view to_string(ParseErrorKind kind) {
    switch (kind) {
    case ParseErrorKind::MalformedStartLine: return "MalformedStartLine";
    case ParseErrorKind::MalformedHeader: return "MalformedHeader";
    case ParseErrorKind::BodyLengthMismatch: return "BodyLengthMismatch";
    }
    return "?";
}

SipMessage parse(std::string_view raw) {
    SipMessage msg;
    auto first = next_line(raw, 0);
    if (!first || first->text.empty())
        throw ParseError(ParseErrorKind::MalformedStartLine, 1, 0, 0, "empty message");

    // start-line
    {
        auto text = first->text;
        auto bad = [&](const std::string& why) {
            return ParseError(ParseErrorKind::MalformedStartLine, 1, first->offset, text.size(), why);
        };
        auto sp1 = text.find(' ');
        if (sp1 == std::string_view::npos) throw bad("missing SP");
        if (text.substr(0, sp1) == "SIP/2.0") {
            auto code_text = text.substr(sp1 + 1, 3);
            int code = 0;
            auto [ptr, ec] = std::from_chars(code_text.data(), code_text.data() + code_text.size(), code);
            if (ec != std::errc{} || ptr != code_text.data() + 3 || code < 100 || code > 699)
                throw bad("bad status code");
            std::string reason;
            if (text.size() > sp1 + 4) {
                if (text[sp1 + 4] != ' ') throw bad("status code not followed by SP");
                reason = std::string(text.substr(sp1 + 5));
            }
            msg.start = StatusLine{code, std::move(reason)};
        } else {
            auto method = text.substr(0, sp1);
            auto sp2 = text.find(' ', sp1 + 1);
            if (!is_token(method) || sp2 == std::string_view::npos) throw bad("bad request-line");
            if (text.substr(sp2 + 1) != "SIP/2.0") throw bad("unsupported SIP version");
            auto uri = SipUri::try_parse(text.substr(sp1 + 1, sp2 - sp1 - 1));
            if (!uri) throw bad("bad Request-URI");
            msg.start = RequestLine{std::string(method), std::move(*uri)};
        }
    }

    std::size_t line_no = 1;
    std::size_t pos = first->next;
    bool terminated = false;
    while (auto line = next_line(raw, pos)) {
        ++line_no;
        pos = line->next;
        if (line->text.empty()) {
            terminated = true;
            break;
        }
        if (line->text.front() == ' ' || line->text.front() == '\t') {
            if (msg.headers.empty())
                throw ParseError(ParseErrorKind::MalformedHeader, line_no, line->offset, line->text.size(),
                                 "continuation without header");
            msg.headers.back().value += "\r\n";
            msg.headers.back().value += line->text;
            continue;
        }
        auto colon = line->text.find(':');
        if (colon == std::string_view::npos)
            throw ParseError(ParseErrorKind::MalformedHeader, line_no, line->offset, line->text.size(),
                             "missing ':'");
        auto name_end = line->text.find_last_not_of(" \t", colon == 0 ? 0 : colon - 1);
        if (colon == 0 || name_end == std::string_view::npos)
            throw ParseError(ParseErrorKind::MalformedHeader, line_no, line->offset, line->text.size(),
                             "empty header name");
        auto name = line->text.substr(0, name_end + 1);
        if (!is_token(name))
            throw ParseError(ParseErrorKind::MalformedHeader, line_no, line->offset, line->text.size(),
                             "invalid header name");
        auto value_start = line->text.find_first_not_of(" \t", colon + 1);
        if (value_start == std::string_view::npos) value_start = line->text.size();
        msg.headers.push_back(Header{std::string(name), std::string(line->text.substr(value_start)),
                                     std::string(line->text.substr(name.size(), value_start - name.size()))});
    }
    if (!terminated) {
        // a header block that runs to the end of the datagram is tolerated only without a body
        return msg;
    }

    auto body = raw.substr(std::min(pos, raw.size()));
    if (auto cl = msg.header("Content-Length")) {
        auto t = trim(*cl);
        std::size_t declared = 0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), declared);
        if (ec != std::errc{} || ptr != t.data() + t.size())
            throw ParseError(ParseErrorKind::MalformedHeader, line_no, pos, 0, "bad Content-Length");
        if (declared != body.size())
            throw ParseError(ParseErrorKind::BodyLengthMismatch, line_no + 1, pos, body.size(),
                             "Content-Length " + std::to_string(declared) + " but body has " +
                                 std::to_string(body.size()) + " bytes");
    }
    msg.body = std::string(body);
    return msg;
}

std::string serialize(const SipMessage& msg) {
    std::string out = msg.start_line();
    out += "\r\n";
    for (const auto& h : msg.headers) {
        out += h.name;
        out += h.separator;
        out += h.value;
        out += "\r\n";
    }
    if (!msg.body.empty() && !msg.has_header("Content-Length"))
        out += "Content-Length: " + std::to_string(msg.body.size()) + "\r\n";
    out += "\r\n";
    out += msg.body;
    return out;
}

std::vector<std::string> strict_violations(const SipMessage& msg) {
    std::vector<std::string> missing;
    if (!msg.is_request()) return missing;
    for (std::string_view name : {"From", "To", "Call-ID", "CSeq", "Via"})
        if (!msg.has_header(name)) missing.emplace_back(name);
    return missing;
}

}  // namespace sxsm::sip
