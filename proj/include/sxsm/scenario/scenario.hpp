#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sxsm/scenario/template.hpp"
#include "sxsm/sip/message.hpp"

namespace sxsm::scenario {

/// What a Recv step waits for: an exact request method, an exact status
/// code, or a status class ("2xx"). `strict`, when set, additionally
/// requires the message to pass (true) or fail (false) strict validation.
struct Matcher {
    enum class Kind { Method, Status, StatusClass };

    Kind kind = Kind::Status;
    std::string method;
    int code = 0;  // full code for Status, leading digit for StatusClass
    std::optional<bool> strict;

    static Matcher for_method(std::string method, std::optional<bool> strict = std::nullopt);
    static Matcher for_status(int code);
    /// "404" or "4xx".
    static Matcher for_status_pattern(std::string_view pattern);

    bool matches(const sip::SipMessage& msg) const;
    /// Attribute value as written in XML: method token, "404" or "4xx".
    std::string pattern() const;

    friend bool operator==(const Matcher&, const Matcher&) = default;
};

/// Sends a named template of the scenario's set, or inline message text
/// when `text` is non-empty.
struct Send {
    std::string template_name;
    std::string text;
    friend bool operator==(const Send&, const Send&) = default;
};

struct Recv {
    Matcher matcher;
    std::optional<std::string> jump;
    std::optional<int> timeout_ms;
    friend bool operator==(const Recv&, const Recv&) = default;
};

struct Pause {
    int ms = 0;
    friend bool operator==(const Pause&, const Pause&) = default;
};

struct Label {
    std::string name;
    friend bool operator==(const Label&, const Label&) = default;
};

enum class ExitIntent { Success, Aborted };

struct Stop {
    ExitIntent intent = ExitIntent::Success;
    friend bool operator==(const Stop&, const Stop&) = default;
};

using Step = std::variant<Send, Recv, Pause, Label, Stop>;

/// Branchable step sequence.
///
/// Consecutive Recv steps in which every step but the last carries a jump
/// label form one alternative group: the call waits until any member
/// matches, the first matching member (document order) wins, a jump goes to
/// its label and a plain member continues after the group. The group's
/// timeout is the smallest timeout_ms among its members; expiry aborts the
/// call.
struct Scenario {
    std::string name;
    std::string set;
    std::vector<Step> steps;
    std::map<std::string, std::size_t> labels;

    /// Rebuilds `labels` and checks every invariant; throws ScenarioError.
    void validate();

    std::size_t label_index(const std::string& label) const;

    /// [first, last] indices of the Recv group starting at `pc`.
    std::pair<std::size_t, std::size_t> recv_group(std::size_t pc) const;

    /// True when the scenario answers calls instead of placing them: its
    /// first non-label step is a Recv.
    bool is_server() const;

    /// Template names referenced by Send steps, without duplicates.
    std::vector<std::string> template_names() const;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

Scenario load_scenario(std::string_view xml);
Scenario load_scenario_file(const std::filesystem::path& path);
std::string save_scenario(const Scenario& scenario);

/// A scenario together with the templates of its set.
struct Bundle {
    Scenario scenario;
    std::map<std::string, MessageTemplate> templates;

    const MessageTemplate& get_template(const std::string& name) const;

    /// Scenario validation plus: every Send names an existing template and
    /// every template's placeholders are well formed. Returns identifiers
    /// that are neither builtin, "fieldN", nor "last_*" (likely typos).
    std::vector<std::string> validate();
};

/// Reads `scenario_file` and the templates it references from
/// `<library>/sets/<set>/<template>.txt`.
Bundle load_bundle(const std::filesystem::path& scenario_file, const std::filesystem::path& library);

/// Writes `<library>/scenarios/<name>.xml` and the template files; returns
/// the scenario path.
std::filesystem::path save_bundle(const Bundle& bundle, const std::filesystem::path& library);

/// CSV rows with a wrapping cursor.
class InjectionTable {
public:
    InjectionTable() = default;
    explicit InjectionTable(std::vector<std::vector<std::string>> rows);

    static InjectionTable parse_csv(std::string_view text);
    static InjectionTable load_csv(const std::filesystem::path& path);
    std::string to_csv() const;

    /// {field0: col0, field1: col1, ...} at the cursor; advances and wraps.
    Bindings next_bindings();
    const std::vector<std::string>& next_row();

    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    std::size_t arity() const { return rows_.empty() ? 0 : rows_.front().size(); }
    std::size_t cursor() const { return cursor_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }

private:
    std::vector<std::vector<std::string>> rows_;
    std::size_t cursor_ = 0;
};

Bindings row_bindings(const std::vector<std::string>& row, const std::string& prefix = "field");

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace sxsm::scenario
