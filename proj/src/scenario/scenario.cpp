#include "sxsm/scenario/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace sxsm::scenario {

Matcher Matcher::for_method(std::string method, std::optional<bool> strict) {
    Matcher m;
    m.kind = Kind::Method;
    m.method = std::move(method);
    m.strict = strict;
    return m;
}

Matcher Matcher::for_status(int code) {
    Matcher m;
    m.kind = Kind::Status;
    m.code = code;
    return m;
}

Matcher Matcher::for_status_pattern(std::string_view pattern) {
    auto bad = [&] { return ScenarioError(ErrorKind::InvalidStep, "status=" + std::string(pattern)); };
    if (pattern.size() != 3 || pattern[0] < '1' || pattern[0] > '6') throw bad();
    if (pattern.substr(1) == "xx" || pattern.substr(1) == "XX") {
        Matcher m;
        m.kind = Kind::StatusClass;
        m.code = pattern[0] - '0';
        return m;
    }
    int code = 0;
    auto [ptr, ec] = std::from_chars(pattern.data(), pattern.data() + 3, code);
    if (ec != std::errc{} || ptr != pattern.data() + 3) throw bad();
    return for_status(code);
}

bool Matcher::matches(const sip::SipMessage& msg) const {
    switch (kind) {
    case Kind::Method:
        if (!msg.is_request() || msg.method() != method) return false;
        return !strict || *strict == sip::is_strictly_valid(msg);
    case Kind::Status:
        return msg.is_response() && msg.status() == code;
    case Kind::StatusClass:
        return msg.is_response() && msg.status() / 100 == code;
    }
    return false;
}

std::string Matcher::pattern() const {
    switch (kind) {
    case Kind::Method: return method;
    case Kind::Status: return std::to_string(code);
    case Kind::StatusClass: return std::to_string(code) + "xx";
    }
    return {};
}

void Scenario::validate() {
    if (steps.empty()) throw ScenarioError(ErrorKind::EmptyScenario, name);
    labels.clear();
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (auto* label = std::get_if<Label>(&steps[i])) {
            if (label->name.empty()) throw ScenarioError(ErrorKind::InvalidStep, "label without name");
            if (!labels.emplace(label->name, i).second)
                throw ScenarioError(ErrorKind::DuplicateLabel, label->name);
        }
    }
    for (const auto& step : steps) {
        if (auto* recv = std::get_if<Recv>(&step)) {
            if (recv->jump && !labels.contains(*recv->jump))
                throw ScenarioError(ErrorKind::DanglingJump, *recv->jump);
            if (recv->timeout_ms && *recv->timeout_ms <= 0)
                throw ScenarioError(ErrorKind::InvalidStep, "recv timeout_ms must be > 0");
        } else if (auto* pause = std::get_if<Pause>(&step)) {
            if (pause->ms < 0) throw ScenarioError(ErrorKind::InvalidStep, "pause ms must be >= 0");
        } else if (auto* send = std::get_if<Send>(&step)) {
            if (send->template_name.empty() && send->text.empty())
                throw ScenarioError(ErrorKind::InvalidStep, "send without template");
            if (!send->text.empty()) placeholders(send->text);
        }
    }
}

std::size_t Scenario::label_index(const std::string& label) const {
    auto it = labels.find(label);
    if (it == labels.end()) throw ScenarioError(ErrorKind::DanglingJump, label);
    return it->second;
}

std::pair<std::size_t, std::size_t> Scenario::recv_group(std::size_t pc) const {
    auto last = pc;
    while (last + 1 < steps.size()) {
        const auto& here = std::get<Recv>(steps[last]);
        if (!here.jump || !std::holds_alternative<Recv>(steps[last + 1])) break;
        ++last;
    }
    return {pc, last};
}

bool Scenario::is_server() const {
    for (const auto& step : steps) {
        if (std::holds_alternative<Label>(step)) continue;
        return std::holds_alternative<Recv>(step);
    }
    return false;
}

std::vector<std::string> Scenario::template_names() const {
    std::vector<std::string> names;
    for (const auto& step : steps)
        if (auto* send = std::get_if<Send>(&step); send && send->text.empty())
            if (std::find(names.begin(), names.end(), send->template_name) == names.end())
                names.push_back(send->template_name);
    return names;
}

const MessageTemplate& Bundle::get_template(const std::string& name) const {
    auto it = templates.find(name);
    if (it == templates.end()) throw ScenarioError(ErrorKind::UnknownTemplate, name);
    return it->second;
}

std::vector<std::string> Bundle::validate() {
    scenario.validate();
    std::vector<std::string> texts;
    for (const auto& step : scenario.steps) {
        if (auto* send = std::get_if<Send>(&step)) {
            if (!send->text.empty())
                texts.push_back(send->text);
            else
                texts.push_back(get_template(send->template_name).text);
        }
    }
    std::vector<std::string> unknown;
    for (const auto& text : texts) {
        for (const auto& id : placeholders(text)) {
            bool field = id.rfind("field", 0) == 0 && id.size() > 5 &&
                         std::all_of(id.begin() + 5, id.end(), [](unsigned char c) { return std::isdigit(c); });
            bool known = field || id.rfind("last_", 0) == 0 || builtin_identifiers().contains(id);
            if (!known && std::find(unknown.begin(), unknown.end(), id) == unknown.end()) unknown.push_back(id);
        }
    }
    return unknown;
}

Bundle load_bundle(const std::filesystem::path& scenario_file, const std::filesystem::path& library) {
    Bundle bundle;
    bundle.scenario = load_scenario_file(scenario_file);
    for (const auto& name : bundle.scenario.template_names()) {
        auto path = library / "sets" / bundle.scenario.set / (name + ".txt");
        if (!std::filesystem::exists(path)) throw ScenarioError(ErrorKind::UnknownTemplate, path.string());
        bundle.templates.emplace(name, MessageTemplate{bundle.scenario.set, name, read_file(path)});
    }
    return bundle;
}

std::filesystem::path save_bundle(const Bundle& bundle, const std::filesystem::path& library) {
    auto set_dir = library / "sets" / bundle.scenario.set;
    std::filesystem::create_directories(set_dir);
    std::filesystem::create_directories(library / "scenarios");
    for (const auto& [name, tmpl] : bundle.templates) write_file(set_dir / (name + ".txt"), tmpl.text);
    auto path = library / "scenarios" / (bundle.scenario.name + ".xml");
    write_file(path, save_scenario(bundle.scenario));
    return path;
}

InjectionTable::InjectionTable(std::vector<std::vector<std::string>> rows) : rows_(std::move(rows)) {
    for (const auto& row : rows_) {
        if (row.empty()) throw ScenarioError(ErrorKind::CsvError, "row with zero columns");
        if (row.size() != rows_.front().size())
            throw ScenarioError(ErrorKind::CsvError, "rows differ in arity");
    }
}

InjectionTable InjectionTable::parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto lf = text.find('\n', pos);
        auto line = text.substr(pos, lf == std::string_view::npos ? text.npos : lf - pos);
        pos = lf == std::string_view::npos ? text.size() : lf + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::size_t start = 0;
        while (true) {
            auto comma = line.find(',', start);
            row.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    return InjectionTable(std::move(rows));
}

InjectionTable InjectionTable::load_csv(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ScenarioError(ErrorKind::Io, "missing CSV file " + path.string());
    return parse_csv(read_file(path));
}

std::string InjectionTable::to_csv() const {
    std::string out;
    for (const auto& row : rows_) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i];
        }
        out += '\n';
    }
    return out;
}

const std::vector<std::string>& InjectionTable::next_row() {
    if (rows_.empty()) throw ScenarioError(ErrorKind::EmptyTable, "injection table");
    const auto& row = rows_[cursor_];
    cursor_ = (cursor_ + 1) % rows_.size();
    return row;
}

Bindings InjectionTable::next_bindings() { return row_bindings(next_row()); }

Bindings row_bindings(const std::vector<std::string>& row, const std::string& prefix) {
    Bindings b;
    for (std::size_t i = 0; i < row.size(); ++i) b[prefix + std::to_string(i)] = row[i];
    return b;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ScenarioError(ErrorKind::Io, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace sxsm::scenario
