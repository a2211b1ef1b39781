#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sxsm/sip/message.hpp"

namespace sxsm::scenario {

enum class ErrorKind {
    XmlSyntax,
    UnknownStepKind,
    DanglingJump,
    BadPlaceholder,
    UnboundPlaceholder,
    EmptyScenario,
    InvalidStep,
    DuplicateLabel,
    UnknownTemplate,
    EmptyTable,
    CsvError,
    Io,
};

std::string_view to_string(ErrorKind kind);

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(ErrorKind kind, std::string detail);
    ErrorKind kind() const { return kind_; }
    /// Offending label, placeholder, template or file name.
    const std::string& detail() const { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

using Bindings = std::map<std::string, std::string>;

/// One message of a set, with "[identifier]" placeholders.
struct MessageTemplate {
    std::string set;
    std::string name;
    std::string text;

    friend bool operator==(const MessageTemplate&, const MessageTemplate&) = default;
};

/// Identifiers referenced by `text`, in first-occurrence order. Throws
/// BadPlaceholder for an unterminated or non-identifier bracket.
std::vector<std::string> placeholders(std::string_view text);

/// Identifiers the engine binds for every call, independent of CSV data.
const std::set<std::string>& builtin_identifiers();

/// Substitutes every placeholder. `[len]`, when not bound explicitly, is
/// the byte length of the expanded body.
std::string expand_text(std::string_view text, const Bindings& bindings);

/// expand_text followed by a permissive parse.
sip::SipMessage expand(const MessageTemplate& tmpl, const Bindings& bindings);

/// Method token on the template's start-line, empty for responses.
std::string template_method(std::string_view text);

}  // namespace sxsm::scenario
