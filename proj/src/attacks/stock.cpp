#include "sxsm/attacks/stock.hpp"

#include <algorithm>

#include <boost/algorithm/string.hpp>

#include "sxsm/defenses/challenges.hpp"

namespace sxsm::attacks {

namespace {

const char* kVia = "Via: SIP/2.0/UDP [local_ip]:[local_port];branch=[branch]\n";
const char* kFrom = "From: <sip:[field1]@[field2]>;tag=[call_number]\n";

std::string request_head(const std::string& method, const std::string& to_header) {
    return method + " sip:[target_user]@[target_host] SIP/2.0\n" + kVia + kFrom + to_header + "Call-ID: [call_id]\n" +
           "CSeq: [cseq] " + method + "\n";
}

const char* kSdp =
    "v=0\n"
    "o=- 1 1 IN IP4 [local_ip]\n"
    "s=-\n"
    "c=IN IP4 [local_ip]\n"
    "t=0 0\n"
    "m=audio 4000 RTP/AVP 0\n";

std::string invite_text(const std::string& extra) {
    return request_head("INVITE", "To: <sip:[target_user]@[target_host]>\n") +
           "Contact: <sip:[field1]@[local_ip]:[local_port]>\n"
           "Max-Forwards: 70\n"
           "Subject: call\n" +
           extra +
           "Content-Type: application/sdp\n"
           "Content-Length: [len]\n"
           "\n" +
           kSdp;
}

std::string response_text(const std::string& status_line, bool add_tag, const std::string& extra = {}) {
    return "SIP/2.0 " + status_line + "\n" +
           "Via: [last_Via]\n"
           "From: [last_From]\n" +
           (add_tag ? "To: [last_To];tag=[call_number]\n" : "To: [last_To]\n") +
           "Call-ID: [last_Call-ID]\n"
           "CSeq: [last_CSeq]\n" +
           extra + "Content-Length: 0\n";
}

std::map<std::string, scenario::MessageTemplate> build_templates() {
    std::map<std::string, std::string> text;
    text["invite"] = invite_text({});
    text["ack"] = request_head("ACK", "To: [last_To]\n") + "Max-Forwards: 70\nContent-Length: 0\n";
    text["ack_spit"] = request_head("ACK", "To: [last_To]\n") +
                       "Max-Forwards: 70\n"
                       "Content-Type: text/plain\n"
                       "Content-Length: [len]\n"
                       "\n"
                       "X-SPIT-Payload: [call_id]\n";
    text["ack_failed"] = text["ack"];
    text["bye"] = request_head("BYE", "To: [last_To]\n") + "Max-Forwards: 70\nContent-Length: 0\n";
    text["cancel"] = "CANCEL sip:[target_user]@[target_host] SIP/2.0\n" + std::string(kVia) + kFrom +
                     "To: <sip:[target_user]@[target_host]>\n"
                     "Call-ID: [call_id]\n"
                     "CSeq: [cseq] CANCEL\n"
                     "Max-Forwards: 70\n"
                     "Content-Length: 0\n";
    text["info_challenge"] = request_head("INFO", "To: [last_To]\n") +
                             "Max-Forwards: 70\n"
                             "Content-Type: text/plain\n"
                             "Content-Length: [len]\n"
                             "\n"
                             "answer=[turing_answer]\n"
                             "preimage=[puzzle_preimage]\n";
    text["options"] = request_head("OPTIONS", "To: <sip:[target_user]@[target_host]>\n") +
                      "Max-Forwards: 70\n"
                      "Accept: application/sdp\n"
                      "Content-Length: 0\n";
    // no Contact: a registrar answers with the current bindings
    text["register_query"] = "REGISTER sip:[target_host] SIP/2.0\n" + std::string(kVia) + kFrom +
                             "To: <sip:[target_user]@[target_host]>\n"
                             "Call-ID: [call_id]\n"
                             "CSeq: [cseq] REGISTER\n"
                             "Max-Forwards: 70\n"
                             "Content-Length: 0\n";
    text["register_bind"] = "REGISTER sip:[field2] SIP/2.0\n" + std::string(kVia) + kFrom +
                            "To: <sip:[field1]@[field2]>\n"
                            "Call-ID: [call_id]\n"
                            "CSeq: [cseq] REGISTER\n"
                            "Contact: <sip:[field1]@[local_ip]:[local_port]>\n"
                            "Expires: 3600\n"
                            "Max-Forwards: 70\n"
                            "Content-Length: 0\n";
    text["resp_180"] = response_text("180 Ringing", true);
    text["resp_200"] = response_text("200 OK", true, "Contact: <sip:[local_ip]:[local_port]>\n");
    text["resp_200_plain"] = response_text("200 OK", false);
    text["resp_202"] = response_text("202 Accepted", true);

    std::map<std::string, scenario::MessageTemplate> out;
    for (auto& [name, t] : text) out[name] = {kStockSet, name, std::move(t)};
    return out;
}

scenario::Scenario named(std::string name, std::string_view xml) {
    auto sc = scenario::load_scenario(xml);
    sc.name = std::move(name);
    sc.set = kStockSet;
    return sc;
}

/// 100/180 loop back, 200 answers, failures ACK and abort.
std::string wait_group(bool answer_challenges) {
    std::string xml = R"(
  <label name="wait"/>
  <recv status="100" jump="wait"/>
  <recv status="180" jump="wait"/>
  <recv status="183" jump=")";
    xml += answer_challenges ? "challenge" : "wait";
    xml += R"("/>
  <recv status="2xx" jump="answered"/>
  <recv status="3xx" jump="failed"/>
  <recv status="4xx" jump="failed"/>
  <recv status="5xx" jump="failed"/>
  <recv status="6xx"/>
  <label name="failed"/>
  <send template="ack_failed"/>
  <stop intent="aborted"/>)";
    if (answer_challenges) xml += R"(
  <label name="challenge"/>
  <send template="info_challenge"/>
  <recv status="2xx" jump="wait"/>)";
    return xml + R"(<label name="answered"/>)";
}

}  // namespace

const std::map<std::string, scenario::MessageTemplate>& stock_templates() {
    static const auto templates = build_templates();
    return templates;
}

scenario::Bundle stock_bundle(scenario::Scenario sc) {
    scenario::Bundle b;
    for (const auto& name : sc.template_names()) {
        auto it = stock_templates().find(name);
        if (it == stock_templates().end()) throw scenario::ScenarioError(scenario::ErrorKind::UnknownTemplate, name);
        b.templates[name] = it->second;
    }
    b.scenario = std::move(sc);
    return b;
}

scenario::Scenario spit_call_scenario(const SpitCallOptions& options) {
    std::string xml = std::string("<scenario><send template=\"invite\"/>") + wait_group(options.answer_challenges) + "<send template=\"" +
                      (options.payload ? "ack_spit" : "ack") + "\"/>";
    if (options.media_ms > 0) xml += "<pause ms=\"" + std::to_string(options.media_ms) + "\"/>";
    xml += R"(<send template="bye"/><recv status="2xx"/></scenario>)";
    return named(options.payload ? "spit_call" : "plain_call", xml);
}

scenario::Scenario caller_awaiting_bye_scenario() {
    return named("call_until_hangup", std::string("<scenario><send template=\"invite\"/>") + wait_group(false) +
                                          R"(<send template="ack"/>
      <recv method="BYE"/>
      <send template="resp_200_plain"/>
    </scenario>)");
}

scenario::Scenario answering_scenario(int hold_ms, const std::string& bye_text) {
    auto sc = named("answer_then_hangup", R"(<scenario>
      <recv method="INVITE"/>
      <send template="resp_180"/>
      <send template="resp_200"/>
      <recv method="ACK"/>
      <pause ms="1"/>
      <send>placeholder</send>
      <recv status="2xx"/>
    </scenario>)");
    std::get<scenario::Pause>(sc.steps[4]).ms = hold_ms;
    std::get<scenario::Send>(sc.steps[5]).text = bye_text;
    return sc;
}

scenario::Scenario register_scenario() {
    return named("register", R"(<scenario>
      <send template="register_bind"/>
      <label name="wait"/>
      <recv status="100" jump="wait"/>
      <recv status="2xx"/>
    </scenario>)");
}

std::string_view to_string(ProbeMethod probe) {
    switch (probe) {
    case ProbeMethod::Invite: return "INVITE";
    case ProbeMethod::Options: return "OPTIONS";
    case ProbeMethod::Register: return "REGISTER";
    }
    return "?";
}

ProbeMethod probe_from_string(std::string_view text) {
    auto upper = boost::to_upper_copy(std::string(text));
    for (auto p : {ProbeMethod::Invite, ProbeMethod::Options, ProbeMethod::Register})
        if (upper == to_string(p)) return p;
    throw std::invalid_argument("probe must be INVITE, OPTIONS or REGISTER: " + std::string(text));
}

scenario::Scenario scan_scenario(ProbeMethod probe) {
    if (probe == ProbeMethod::Invite)
        return named("scan_invite", R"(<scenario>
      <send template="invite"/>
      <label name="wait"/>
      <recv status="100" jump="wait"/>
      <recv status="183" jump="wait"/>
      <recv status="180" jump="ringing"/>
      <recv status="2xx" jump="answered"/>
      <recv status="3xx" jump="done"/>
      <recv status="4xx" jump="done"/>
      <recv status="5xx" jump="done"/>
      <recv status="6xx"/>
      <label name="done"/>
      <send template="ack_failed"/>
      <stop/>
      <label name="ringing"/>
      <send template="cancel"/>
      <label name="cancelling"/>
      <recv status="100" jump="cancelling"/>
      <recv status="180" jump="cancelling"/>
      <recv status="487" jump="cancelled"/>
      <recv status="2xx"/>
      <recv status="487" jump="cancelled"/>
      <recv status="2xx" jump="answered"/>
      <label name="cancelled"/>
      <send template="ack_failed"/>
      <stop/>
      <label name="answered"/>
      <send template="ack"/>
      <send template="bye"/>
      <recv status="2xx"/>
    </scenario>)");
    const char* tmpl = probe == ProbeMethod::Options ? "options" : "register_query";
    return named(std::string("scan_") + (probe == ProbeMethod::Options ? "options" : "register"),
                 std::string(R"(<scenario><send template=")") + tmpl + R"("/>
      <label name="wait"/>
      <recv status="100" jump="wait"/>
      <recv status="2xx" jump="done"/>
      <recv status="3xx" jump="done"/>
      <recv status="4xx" jump="done"/>
      <recv status="5xx" jump="done"/>
      <recv status="6xx"/>
      <label name="done"/>
    </scenario>)");
}

// --- challenge answers --------------------------------------------------------

ChallengeInfo parse_challenge(const sip::SipMessage& response) {
    auto header = response.header("X-Challenge");
    if (!header) throw ChallengeFormatUnknown("no X-Challenge header");
    std::vector<std::string> parts;
    boost::split(parts, *header, boost::is_any_of(";"));
    for (auto& p : parts) boost::trim(p);
    ChallengeInfo info;
    if (parts[0] == "turing") {
        info.kind = ChallengeInfo::Kind::Turing;
        auto pos = response.body.find("digits=");
        if (pos == std::string::npos) throw ChallengeFormatUnknown("turing challenge without digits");
        auto end = response.body.find_first_of("\r\n", pos);
        info.digits = response.body.substr(pos + 7, end == std::string::npos ? end : end - pos - 7);
        return info;
    }
    if (parts[0] != "puzzle") throw ChallengeFormatUnknown("unknown challenge " + parts[0]);
    info.kind = ChallengeInfo::Kind::Puzzle;
    for (const auto& p : parts) {
        if (p.rfind("bits=", 0) == 0) info.bits = std::stoi(p.substr(5));
        if (p.rfind("image=", 0) == 0) info.image_hex = p.substr(6);
    }
    if (info.bits <= 0 || info.image_hex.size() != 40) throw ChallengeFormatUnknown("malformed puzzle challenge");
    return info;
}

std::map<std::string, engine::ComputedBinding> challenge_answers(SolverSkill skill) {
    auto info_of = [](const sip::SipMessage* last) -> std::optional<ChallengeInfo> {
        if (!last || !last->is_response()) return std::nullopt;
        try {
            return parse_challenge(*last);
        } catch (const ChallengeFormatUnknown&) {
            return std::nullopt;
        }
    };
    std::map<std::string, engine::ComputedBinding> out;
    out["turing_answer"] = [skill, info_of](const sip::SipMessage* last, const scenario::Bindings&) -> std::string {
        auto info = info_of(last);
        if (!info || info->kind != ChallengeInfo::Kind::Turing) return {};
        return skill == SolverSkill::Human ? info->digits : "00000";
    };
    out["puzzle_preimage"] = [info_of](const sip::SipMessage* last, const scenario::Bindings&) -> std::string {
        auto info = info_of(last);
        if (!info || info->kind != ChallengeInfo::Kind::Puzzle) return {};
        defenses::Puzzle p;
        p.bits = info->bits;
        auto image = defenses::from_hex(info->image_hex);
        std::copy(image.begin(), image.end(), p.image.begin());
        return defenses::to_hex(defenses::solve_puzzle(p).preimage);
    };
    return out;
}

}  // namespace sxsm::attacks
