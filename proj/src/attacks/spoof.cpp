#include "sxsm/attacks/spoof.hpp"

#include <algorithm>
#include <map>

#include <boost/algorithm/string.hpp>

#include "sxsm/scenario/template.hpp"

namespace sxsm::attacks {

namespace {

constexpr const char* kProbeLabel = "__probe_";

struct HeaderLine {
    std::string name;
    std::string line;
    bool used = false;
};

std::string lower(std::string s) { return boost::to_lower_copy(std::move(s)); }

std::string plausible_value(const std::string& lower_name, const std::string& method, const std::string& user_agent) {
    static const std::map<std::string, std::string> values{
        {"via", "SIP/2.0/UDP [local_ip]:[local_port];branch=[branch]"},
        {"from", "<sip:[field1]@[field2]>;tag=[call_number]"},
        {"to", "<sip:[target_user]@[target_host]>"},
        {"call-id", "[call_id]"},
        {"max-forwards", "70"},
        {"contact", "<sip:[field1]@[local_ip]:[local_port]>"},
        {"allow", "INVITE, ACK, CANCEL, BYE, OPTIONS"},
        {"supported", "replaces, timer"},
        {"content-type", "application/sdp"},
        {"content-length", "[len]"},
        {"accept", "application/sdp"},
        {"expires", "3600"},
        {"subject", "call"},
        {"user-agent", ""},
    };
    if (lower_name == "cseq") return "[cseq] " + method;
    if (lower_name == "user-agent") return user_agent;
    auto it = values.find(lower_name);
    return it == values.end() ? "1" : it->second;
}

/// Steps answering the probes of one recv group, then the group again.
std::vector<scenario::Step> probe_block(const std::string& label, const defenses::BehaviorRow* row,
                                        const std::vector<scenario::Step>& group_copy) {
    std::vector<scenario::Step> out{scenario::Label{label}};
    if (row && row->status > 0) {
        std::string text = "SIP/2.0 " + std::to_string(row->status) + " " +
                           (row->status < 300 ? "OK" : row->status < 500 ? "Bad Request" : "Server Error") + "\n" +
                           "Via: [last_Via]\nFrom: [last_From]\n";
        if (row->probe != defenses::kMalformedProbe) text += "To: [last_To];tag=[call_number]\n";
        text += "Call-ID: [last_Call-ID]\nCSeq: [last_CSeq]\n";
        for (const auto& [name, value] : row->headers) text += name + ": " + value + "\n";
        text += "Content-Length: 0\n";
        out.push_back(scenario::Send{"", std::move(text)});
    }
    out.insert(out.end(), group_copy.begin(), group_copy.end());
    return out;
}

bool already_spoofed(const scenario::Scenario& sc) {
    return std::any_of(sc.steps.begin(), sc.steps.end(), [](const scenario::Step& s) {
        auto* l = std::get_if<scenario::Label>(&s);
        return l && l->name.rfind(kProbeLabel, 0) == 0;
    });
}

void add_probe_answers(scenario::Scenario& sc, const std::vector<defenses::BehaviorRow>& behavior) {
    if (behavior.empty() || already_spoofed(sc)) return;
    const defenses::BehaviorRow* compliant = nullptr;
    const defenses::BehaviorRow* malformed = nullptr;
    for (const auto& row : behavior) {
        if (row.probe == defenses::kCompliantProbe) compliant = &row;
        if (row.probe == defenses::kMalformedProbe) malformed = &row;
    }

    std::vector<scenario::Step> steps, tail;
    int k = 0;
    for (std::size_t pc = 0; pc < sc.steps.size();) {
        if (!std::holds_alternative<scenario::Recv>(sc.steps[pc])) {
            steps.push_back(sc.steps[pc++]);
            continue;
        }
        auto [first, last] = sc.recv_group(pc);
        std::string base = kProbeLabel + std::to_string(k++);
        std::vector<scenario::Step> group{
            scenario::Recv{scenario::Matcher::for_method("OPTIONS", true), base + "_c", std::nullopt},
            scenario::Recv{scenario::Matcher::for_method("OPTIONS", false), base + "_m", std::nullopt},
        };
        for (auto i = first; i <= last; ++i) group.push_back(sc.steps[i]);
        steps.insert(steps.end(), group.begin(), group.end());

        auto copy = group;
        auto& tail_member = std::get<scenario::Recv>(copy.back());
        bool falls_through = !tail_member.jump;
        if (falls_through) tail_member.jump = base + "_cont";
        auto c = probe_block(base + "_c", compliant, copy);
        auto m = probe_block(base + "_m", malformed, copy);
        tail.insert(tail.end(), c.begin(), c.end());
        tail.insert(tail.end(), m.begin(), m.end());
        if (falls_through) steps.push_back(scenario::Label{base + "_cont"});
        pc = last + 1;
    }
    if (!tail.empty()) {
        // the original flow must not run into the probe blocks
        auto* end = steps.empty() ? nullptr : std::get_if<scenario::Stop>(&steps.back());
        if (!end) steps.push_back(scenario::Stop{});
        steps.insert(steps.end(), tail.begin(), tail.end());
    }
    sc.steps = std::move(steps);
    sc.validate();
}

}  // namespace

const std::vector<std::string>& required_headers() {
    static const std::vector<std::string> names{"via", "from", "to", "call-id", "cseq"};
    return names;
}

std::string canonical_header_name(const std::string& lower_name) {
    static const std::map<std::string, std::string> special{
        {"call-id", "Call-ID"}, {"cseq", "CSeq"}, {"www-authenticate", "WWW-Authenticate"}, {"mime-version", "MIME-Version"}};
    if (auto it = special.find(lower_name); it != special.end()) return it->second;
    if (lower_name.size() == 1) return lower_name;
    std::string out = lower_name;
    bool start = true;
    for (auto& ch : out) {
        if (start) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        start = ch == '-';
    }
    return out;
}

scenario::MessageTemplate reorder_template(const scenario::MessageTemplate& tmpl, const std::vector<std::string>& names,
                                           const std::string& user_agent) {
    std::vector<std::string> wanted;
    for (const auto& n : names) wanted.push_back(lower(n));
    for (const auto& r : required_headers())
        if (std::find(wanted.begin(), wanted.end(), r) == wanted.end())
            throw IncompatibleFingerprint("layout lacks " + canonical_header_name(r));

    auto split = tmpl.text.find("\n\n");
    std::string head = tmpl.text.substr(0, split);
    std::string rest = split == std::string::npos ? "\n" : tmpl.text.substr(split);
    std::vector<std::string> lines;
    boost::split(lines, head, boost::is_any_of("\n"));
    if (lines.empty()) return tmpl;
    auto method = scenario::template_method(tmpl.text);

    std::vector<HeaderLine> headers;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto colon = lines[i].find(':');
        if (colon == std::string::npos) continue;
        headers.push_back({lower(boost::trim_copy(lines[i].substr(0, colon))), lines[i]});
    }
    std::vector<std::string> have;
    for (const auto& h : headers) have.push_back(h.name);
    if (have == wanted) return tmpl;

    std::string out = lines.front() + "\n";
    for (std::size_t i = 0; i < wanted.size(); ++i) {
        auto it = std::find_if(headers.begin(), headers.end(),
                               [&](const HeaderLine& h) { return !h.used && h.name == wanted[i]; });
        if (it != headers.end()) {
            it->used = true;
            auto colon = it->line.find(':');
            out += names[i] + it->line.substr(colon) + "\n";
        } else {
            out += names[i] + ": " + plausible_value(wanted[i], method, user_agent) + "\n";
        }
    }
    if (!out.empty()) out.pop_back();
    return {tmpl.set, tmpl.name, out + rest};
}

scenario::Bundle spoof_device(scenario::Bundle bundle, const sip::HeaderFingerprint& fingerprint,
                              const std::vector<defenses::BehaviorRow>& behavior, const std::string& method) {
    std::vector<std::string> names;
    for (const auto& n : fingerprint.header_names) names.push_back(canonical_header_name(n));
    auto agent = fingerprint.label.empty() ? std::string("SIP Phone") : fingerprint.label;
    for (auto& [name, tmpl] : bundle.templates)
        if (scenario::template_method(tmpl.text) == method) tmpl = reorder_template(tmpl, names, agent);
    add_probe_answers(bundle.scenario, behavior);
    return bundle;
}

scenario::Bundle spoof_device(scenario::Bundle bundle, const defenses::DeviceProfile& device) {
    for (auto& [name, tmpl] : bundle.templates) {
        auto layout = device.layouts.find(scenario::template_method(tmpl.text));
        if (layout != device.layouts.end()) tmpl = reorder_template(tmpl, layout->second, device.label);
    }
    add_probe_answers(bundle.scenario, device.behavior);
    return bundle;
}

}  // namespace sxsm::attacks
