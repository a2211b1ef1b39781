#include "sxsm/scenario/template.hpp"

#include <algorithm>
#include <cctype>

namespace sxsm::scenario {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

bool is_identifier(std::string_view s) {
    return !s.empty() && is_ident_start(s.front()) && std::all_of(s.begin(), s.end(), is_ident_char);
}

/// Offset of the first byte after the blank line separating headers from
/// body, npos when the text has no blank line.
std::size_t body_offset(std::string_view text) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto lf = text.find('\n', pos);
        if (lf == std::string_view::npos) return std::string_view::npos;
        auto line_end = (lf > pos && text[lf - 1] == '\r') ? lf - 1 : lf;
        if (line_end == pos && pos != 0) return lf + 1;
        pos = lf + 1;
    }
    return std::string_view::npos;
}

template <typename Fn>
std::string substitute(std::string_view text, Fn&& lookup) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto open = text.find('[', pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, open - pos));
        auto close = text.find(']', open);
        if (close == std::string_view::npos)
            throw ScenarioError(ErrorKind::BadPlaceholder, std::string(text.substr(open, 16)));
        auto name = text.substr(open + 1, close - open - 1);
        if (!is_identifier(name)) throw ScenarioError(ErrorKind::BadPlaceholder, std::string(name));
        out.append(lookup(std::string(name)));
        pos = close + 1;
    }
    return out;
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::XmlSyntax: return "XmlSyntax";
    case ErrorKind::UnknownStepKind: return "UnknownStepKind";
    case ErrorKind::DanglingJump: return "DanglingJump";
    case ErrorKind::BadPlaceholder: return "BadPlaceholder";
    case ErrorKind::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorKind::EmptyScenario: return "EmptyScenario";
    case ErrorKind::InvalidStep: return "InvalidStep";
    case ErrorKind::DuplicateLabel: return "DuplicateLabel";
    case ErrorKind::UnknownTemplate: return "UnknownTemplate";
    case ErrorKind::EmptyTable: return "EmptyTable";
    case ErrorKind::CsvError: return "CsvError";
    case ErrorKind::Io: return "Io";
    }
    return "?";
}

ScenarioError::ScenarioError(ErrorKind kind, std::string detail)
    : std::runtime_error(std::string(to_string(kind)) + "(" + detail + ")"), kind_(kind),
      detail_(std::move(detail)) {}

std::vector<std::string> placeholders(std::string_view text) {
    std::vector<std::string> names;
    substitute(text, [&](const std::string& name) {
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
        return std::string{};
    });
    return names;
}

const std::set<std::string>& builtin_identifiers() {
    static const std::set<std::string> ids{
        "local_ip", "local_port", "remote_ip", "remote_port", "call_id", "cseq",
        "len", "branch", "call_number", "target_user", "target_host", "target_port",
        "domain", "caller_uri",
    };
    return ids;
}

std::string expand_text(std::string_view text, const Bindings& bindings) {
    bool wants_len = false;
    auto first = substitute(text, [&](const std::string& name) -> std::string {
        if (auto it = bindings.find(name); it != bindings.end()) return it->second;
        if (name == "len") {
            wants_len = true;
            return "[len]";
        }
        throw ScenarioError(ErrorKind::UnboundPlaceholder, name);
    });
    if (!wants_len) return first;
    auto offset = body_offset(first);
    auto body_len = std::to_string(offset == std::string::npos ? 0 : first.size() - offset);
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto at = first.find("[len]", pos);
        if (at == std::string::npos) break;
        out.append(first, pos, at - pos);
        out += body_len;
        pos = at + 5;
    }
    out.append(first, pos);
    return out;
}

sip::SipMessage expand(const MessageTemplate& tmpl, const Bindings& bindings) {
    auto text = expand_text(tmpl.text, bindings);
    auto start = text.find_first_not_of("\r\n");
    if (start == std::string::npos) start = text.size();
    text.erase(0, start);
    if (body_offset(text) == std::string::npos) {
        // header-only template: make sure the block is terminated
        if (!text.empty() && text.back() != '\n') text += "\r\n";
        text += "\r\n";
    }
    return sip::parse(text);
}

std::string template_method(std::string_view text) {
    auto start = text.find_first_not_of("\r\n \t");
    if (start == std::string_view::npos) return {};
    text = text.substr(start);
    auto sp = text.find(' ');
    auto token = text.substr(0, sp);
    if (token == "SIP/2.0") return {};
    return std::string(token);
}

}  // namespace sxsm::scenario
