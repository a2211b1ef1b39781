#include "sxsm/defenses/endpoint.hpp"

#include <charconv>

#include <boost/algorithm/string/trim.hpp>

namespace sxsm::defenses {

std::string_view to_string(RecordOutcome outcome) {
    switch (outcome) {
    case RecordOutcome::Forwarded: return "forwarded";
    case RecordOutcome::Rejected: return "rejected";
    case RecordOutcome::Challenged: return "challenged";
    case RecordOutcome::Quarantined: return "quarantined";
    }
    return "?";
}

namespace {

std::string identity_of(const std::optional<sip::SipUri>& uri) { return uri ? uri->identity() : std::string{}; }

std::string reason_phrase(int status) {
    switch (status) {
    case 100: return "Trying";
    case 180: return "Ringing";
    case 183: return "Session Progress";
    case 200: return "OK";
    case 202: return "Accepted";
    case 400: return "Bad Request";
    case 402: return "Payment Required";
    case 403: return "Forbidden";
    case 404: return "Not Found";
    case 405: return "Method Not Allowed";
    case 480: return "Temporarily Unavailable";
    case 481: return "Call/Transaction Does Not Exist";
    case 487: return "Request Terminated";
    case 603: return "Decline";
    default: return "Status";
    }
}

std::optional<net::Address> contact_address(const sip::SipMessage& msg) {
    auto uri = msg.contact_uri();
    if (!uri || uri->host_kind() != sip::HostKind::Ipv4) return std::nullopt;
    return net::Address{uri->host, uri->port.value_or(5060)};
}

DefenseRecord new_record(std::string call_id, std::string method, const CallAttempt& a, TimeMs now) {
    DefenseRecord r;
    r.call_id = std::move(call_id);
    r.method = std::move(method);
    r.caller = a.caller;
    r.callee = a.callee;
    r.source = a.source.str();
    r.time_ms = now;
    return r;
}

std::optional<double> parse_number(std::string_view text) {
    std::string s(text);
    boost::algorithm::trim(s);
    if (!s.empty() && s[0] == '+') s.erase(0, 1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

class DefenseEndpoint::Impl {
public:
    enum class State { Challenged, Probing, Ringing, Answered, Ended };

    struct Call {
        CallAttempt attempt;
        sip::SipMessage invite;
        std::size_t record = 0;
        State state = State::Ringing;
        Verdict challenge;
        std::size_t challenge_gate = 0;
        net::EventLoop::TimerId timer = 0;
        TimeMs answered_at = 0;
        bool honeypot = false;
        std::string to_tag;
        std::optional<net::Address> relay_to;
        std::vector<ProbeObservation> probes;
        std::size_t probes_pending = 0;
    };

    struct Transaction {
        net::Address origin;
        net::Address target;
    };

    Impl(net::Transport& transport, DefenseStores& stores, Chain chain, EndpointOptions options)
        : transport_(transport), stores_(stores), chain_(std::move(chain)), options_(std::move(options)) {
        transport_.on_receive([this](const net::Address& from, const std::string& bytes) { on_datagram(from, bytes); });
    }

    ~Impl() {
        transport_.on_receive({});
        for (auto& [_, c] : calls_)
            if (c.timer) loop().cancel(c.timer);
    }

    net::Transport& transport_;
    DefenseStores& stores_;
    Chain chain_;
    EndpointOptions options_;
    std::map<std::string, Call> calls_;
    std::map<std::string, Transaction> transactions_;
    std::vector<DefenseRecord> records_;
    int established_ = 0;
    int answered_total_ = 0;
    std::uint64_t tags_ = 0;

    net::EventLoop& loop() { return transport_.loop(); }
    TimeMs now() { return loop().now(); }

    // --- sending -----------------------------------------------------------

    void send(const net::Address& to, sip::SipMessage msg) {
        msg.set_header("Content-Length", std::to_string(msg.body.size()));
        if (msg.is_response()) chain_.observe(identity_of(msg.from_uri()), ids::Direction::ToSource, now(), msg);
        transport_.send(to, sip::serialize(msg));
    }

    sip::SipMessage response_to(const sip::SipMessage& req, int status, const std::string& to_tag = {}) {
        auto r = sip::SipMessage::response(status, reason_phrase(status));
        for (auto via : req.headers_named("Via")) r.add_header("Via", std::string(via));
        for (const char* name : {"From", "To", "Call-ID", "CSeq"}) {
            auto v = req.header(name);
            std::string value = v ? std::string(*v) : std::string{};
            if (std::string_view(name) == "To" && status > 100 && !to_tag.empty() &&
                value.find(";tag=") == std::string::npos)
                value += ";tag=" + to_tag;
            r.add_header(name, value);
        }
        return r;
    }

    void reply(const net::Address& to, const sip::SipMessage& req, int status, const std::string& to_tag = {}) {
        send(to, response_to(req, status, to_tag));
    }

    void reply_call(Call& call, int status, sip::SipMessage extra = {}) {
        auto r = response_to(call.invite, status, call.to_tag);
        for (auto& h : extra.headers) r.headers.push_back(std::move(h));
        r.body = std::move(extra.body);
        if (status == 200) r.add_header("Contact", "<sip:" + call.attempt.callee + ">");
        send(call.attempt.source, std::move(r));
    }

    // --- records -----------------------------------------------------------

    DefenseRecord& record(Call& call) { return records_[call.record]; }

    void finish_record(Call& call, RecordOutcome outcome, const Verdict& v, const std::string& gate) {
        auto& r = record(call);
        r.outcome = outcome;
        r.verdict = v.str();
        r.gate = gate;
    }

    // --- dispatch ----------------------------------------------------------

    void on_datagram(const net::Address& from, const std::string& bytes) {
        sip::SipMessage msg;
        try {
            msg = sip::parse(bytes);
        } catch (const sip::ParseError&) {
            return;
        }
        if (msg.is_response()) {
            on_response(from, msg);
            return;
        }
        chain_.observe(identity_of(msg.from_uri()), ids::Direction::FromSource, now(), msg);
        auto id = msg.call_id();
        auto method = std::string(msg.method());
        if (auto it = calls_.find(id); it != calls_.end()) {
            in_call(it->second, from, msg);
            return;
        }
        if (auto it = transactions_.find(id); it != transactions_.end()) {
            auto& t = it->second;
            transport_.send(from == t.origin ? t.target : t.origin, sip::serialize(msg));
            return;
        }
        if (method == "INVITE")
            on_invite(from, std::move(msg));
        else if (method == "OPTIONS")
            on_options(from, msg);
        else if (method == "REGISTER")
            on_register(from, msg);
        else if (method == "ACK")
            return;
        else
            on_other(from, msg);
    }

    void on_response(const net::Address& from, const sip::SipMessage& msg) {
        auto id = msg.call_id();
        if (auto it = calls_.find(id); it != calls_.end()) {
            auto& call = it->second;
            if (call.state == State::Probing && msg.cseq_method() == "OPTIONS") {
                on_probe_response(call, msg);
                return;
            }
            if (call.relay_to) {
                bool from_callee = from == *call.relay_to;
                auto to = from_callee ? call.attempt.source : *call.relay_to;
                if (from_callee && msg.cseq_method() == "INVITE") {
                    auto& r = record(call);
                    if (msg.status() >= 200) r.final_status = msg.status();
                    if (msg.status() >= 200 && msg.status() < 300 && call.state != State::Answered) {
                        call.state = State::Answered;
                        call.answered_at = now();
                        r.answered = true;
                        ++established_;
                        ++answered_total_;
                    }
                }
                if (from_callee) chain_.observe(identity_of(msg.from_uri()), ids::Direction::ToSource, now(), msg);
                transport_.send(to, sip::serialize(msg));
            }
            return;
        }
        if (auto it = transactions_.find(id); it != transactions_.end()) {
            auto& t = it->second;
            transport_.send(from == t.target ? t.origin : t.target, sip::serialize(msg));
        }
    }

    // --- new call attempts -------------------------------------------------

    void on_invite(const net::Address& from, sip::SipMessage msg) {
        auto id = msg.call_id();
        Call call;
        call.invite = msg;
        call.attempt = CallAttempt::from(std::move(msg), from, now());
        call.to_tag = "d" + std::to_string(++tags_);
        call.record = records_.size();
        records_.push_back(new_record(id, "INVITE", call.attempt, now()));
        auto& c = calls_.emplace(id, std::move(call)).first->second;
        reply(from, c.invite, 100);

        if (options_.authenticate_source && !authenticated(c.attempt)) {
            reject(c, Verdict::reject(403, "identity"), "registrar");
            return;
        }
        evaluate(c, 0);
    }

    bool authenticated(const CallAttempt& a) {
        auto from = a.msg.from_uri();
        if (!from || from->host != options_.domain) return true;
        auto bound = stores_.registrar.lookup(a.caller, now());
        return bound && *bound == a.source;
    }

    void evaluate(Call& call, std::size_t from_gate) {
        call.attempt.now = now();
        auto out = chain_.run(call.attempt, from_gate);
        const auto& v = out.verdict;
        auto gate = out.gate < chain_.size() ? chain_.gate(out.gate).name() : std::string{};
        switch (v.kind) {
        case Verdict::Kind::Forward: forward(call); return;
        case Verdict::Kind::Reject: reject(call, v, gate); return;
        case Verdict::Kind::Quarantine: quarantine(call, gate); return;
        case Verdict::Kind::Challenge: challenge(call, v, out.gate); return;
        }
    }

    void forward(Call& call) {
        finish_record(call, RecordOutcome::Forwarded, Verdict::forward(), {});
        if (options_.role == EndpointRole::Phone) {
            ring(call, options_.phone_user);
            return;
        }
        const auto& callee = call.attempt.callee;
        if (auto contact = stores_.registrar.lookup(callee, now())) {
            call.relay_to = contact;
            call.state = State::Ringing;
            transport_.send(*contact, sip::serialize(call.invite));
            return;
        }
        auto user = options_.users.find(callee);
        if (user == options_.users.end()) {
            final_reply(call, 404);
        } else if (!user->second.online) {
            final_reply(call, 480);
        } else {
            ring(call, user->second);
        }
    }

    void ring(Call& call, const SimulatedUser& user) {
        call.state = State::Ringing;
        reply_call(call, 180);
        call.timer = loop().after(user.ring_ms, [this, id = call.invite.call_id()] {
            auto it = calls_.find(id);
            if (it == calls_.end()) return;
            auto& c = it->second;
            c.timer = 0;
            if (c.state != State::Ringing) return;
            c.state = State::Answered;
            c.answered_at = now();
            record(c).answered = true;
            record(c).final_status = 200;
            ++established_;
            ++answered_total_;
            reply_call(c, 200);
        });
    }

    void final_reply(Call& call, int status) {
        record(call).final_status = status;
        call.state = State::Ended;
        reply_call(call, status);
    }

    void reject(Call& call, const Verdict& v, const std::string& gate) {
        finish_record(call, RecordOutcome::Rejected, v, gate);
        settle_hold(call, false);
        final_reply(call, v.status);
    }

    void quarantine(Call& call, const std::string& gate) {
        finish_record(call, RecordOutcome::Quarantined, Verdict::quarantine(), gate);
        call.honeypot = true;
        settle_hold(call, false);
        ring(call, SimulatedUser{});
    }

    void challenge(Call& call, const Verdict& v, std::size_t gate_index) {
        auto& r = record(call);
        r.challenged = true;
        call.challenge = v;
        call.challenge_gate = gate_index;
        switch (v.challenge) {
        case ChallengeKind::Payment:
            r.hold_id = v.token;
            evaluate(call, gate_index + 1);
            return;
        case ChallengeKind::Probe: start_probes(call); return;
        case ChallengeKind::Turing:
        case ChallengeKind::Puzzle: break;
        }
        finish_record(call, RecordOutcome::Challenged, v, chain_.gate(gate_index).name());
        call.state = State::Challenged;
        sip::SipMessage extra;
        chain_.gate(gate_index).render_challenge(v, extra);
        reply_call(call, 183, std::move(extra));
        call.timer = loop().after(stores_.turing.expiry_ms(), [this, id = call.invite.call_id()] {
            auto it = calls_.find(id);
            if (it == calls_.end() || it->second.state != State::Challenged) return;
            it->second.timer = 0;
            reject(it->second, Verdict::reject(403, "challenge expired"), chain_.gate(it->second.challenge_gate).name());
        });
    }

    void resolve(Call& call, const ChallengeAnswer& answer) {
        if (call.timer) loop().cancel(call.timer);
        call.timer = 0;
        call.attempt.now = now();
        auto v = chain_.verify(call.challenge_gate, call.attempt, call.challenge, answer);
        if (v.is_forward())
            evaluate(call, call.challenge_gate + 1);
        else
            reject(call, v, chain_.gate(call.challenge_gate).name());
    }

    // --- active fingerprinting ----------------------------------------------

    void start_probes(Call& call) {
        call.state = State::Probing;
        auto probes = stores_.fingerprints.probes();
        call.probes.clear();
        call.probes_pending = probes.size();
        const auto& id = call.invite.call_id();
        auto local = transport_.local();
        for (std::size_t i = 0; i < probes.size(); ++i) {
            call.probes.push_back({probes[i], std::nullopt});
            auto uri = sip::SipUri::parse("sip:" + (call.attempt.caller.empty() ? std::string("unknown@") + call.attempt.source.ip
                                                                                : call.attempt.caller));
            auto p = sip::SipMessage::request("OPTIONS", uri);
            p.add_header("Via", "SIP/2.0/UDP " + local.str() + ";branch=z9hG4bK-probe-" + id + "-" + std::to_string(i));
            p.add_header("Max-Forwards", "70");
            p.add_header("From", "<sip:probe@" + options_.domain + ">;tag=probe" + std::to_string(i));
            if (probes[i] != kMalformedProbe) p.add_header("To", "<" + uri.str() + ">");
            p.add_header("Call-ID", id);
            p.add_header("CSeq", std::to_string(9001 + i) + " OPTIONS");
            p.add_header("Accept", "application/sdp");
            send(call.attempt.source, std::move(p));
        }
        call.timer = loop().after(options_.probe_timeout_ms, [this, id] {
            auto it = calls_.find(id);
            if (it == calls_.end() || it->second.state != State::Probing) return;
            it->second.timer = 0;
            finish_probes(it->second);
        });
    }

    void on_probe_response(Call& call, const sip::SipMessage& msg) {
        auto cseq = msg.header("CSeq");
        if (!cseq) return;
        int n = 0;
        std::from_chars(cseq->data(), cseq->data() + cseq->size(), n);
        auto i = static_cast<std::size_t>(n - 9001);
        if (n < 9001 || i >= call.probes.size() || call.probes[i].response) return;
        if (msg.status() < 200) return;
        call.probes[i].response = msg;
        if (--call.probes_pending == 0) finish_probes(call);
    }

    void finish_probes(Call& call) {
        if (call.timer) loop().cancel(call.timer);
        call.timer = 0;
        call.state = State::Ringing;
        ChallengeAnswer answer;
        answer.probes = call.probes;
        resolve(call, answer);
    }

    // --- in-dialog requests -------------------------------------------------

    void in_call(Call& call, const net::Address& from, const sip::SipMessage& msg) {
        auto method = std::string(msg.method());
        if (call.relay_to) {
            relay_in_dialog(call, from, msg);
            return;
        }
        if (method == "ACK") {
            if (call.state == State::Answered && msg.body.find("X-SPIT-Payload:") != std::string::npos)
                record(call).spit_payload = true;
            return;
        }
        if (method == "CANCEL") {
            reply(from, msg, 200, call.to_tag);
            if (call.state == State::Ringing || call.state == State::Challenged || call.state == State::Probing) {
                if (call.timer) loop().cancel(call.timer);
                call.timer = 0;
                call.state = State::Ended;
                record(call).final_status = 487;
                settle_hold(call, false);
                reply_call(call, 487);
            }
            return;
        }
        if (method == "BYE") {
            if (call.state != State::Answered) {
                reply(from, msg, 481);
                return;
            }
            reply(from, msg, 200, call.to_tag);
            end_call(call, nullptr);
            return;
        }
        if (method == "INFO" && call.state == State::Challenged) {
            if (msg.body.find("listen") != std::string::npos && call.challenge.challenge == ChallengeKind::Turing) {
                auto r = response_to(msg, 200, call.to_tag);
                r.body = "digits=" + stores_.turing.digits(call.challenge.token) + "\r\n";
                r.add_header("Content-Type", "text/plain");
                send(from, std::move(r));
                return;
            }
            reply(from, msg, 200, call.to_tag);
            resolve(call, ChallengeAnswer{msg.body, {}});
            return;
        }
        if (method == "INVITE") return;  // retransmission
        reply(from, msg, call.state == State::Ended ? 481 : 200, call.to_tag);
    }

    void relay_in_dialog(Call& call, const net::Address& from, const sip::SipMessage& msg) {
        bool from_callee = from == *call.relay_to;
        auto to = from_callee ? call.attempt.source : *call.relay_to;
        auto method = msg.method();
        if (method == "ACK" && msg.body.find("X-SPIT-Payload:") != std::string::npos) record(call).spit_payload = true;
        if (method == "BYE" && call.state == State::Answered) {
            std::optional<double> feedback;
            if (from_callee)
                if (auto h = msg.header(options_.feedback_header)) feedback = parse_number(*h);
            end_call(call, feedback ? &*feedback : nullptr);
        }
        if (method == "CANCEL" && call.state == State::Ringing) {
            record(call).final_status = 487;
            settle_hold(call, false);
        }
        transport_.send(to, sip::serialize(msg));
    }

    void end_call(Call& call, const double* feedback) {
        if (call.state != State::Answered) return;
        call.state = State::Ended;
        --established_;
        if (call.honeypot) return;
        auto seconds = static_cast<double>(now() - call.answered_at) / 1000.0;
        const auto& caller = call.attempt.caller;
        auto& rep = stores_.reputation;
        rep.update(caller, reputation_event::CallEnded{seconds}, now());
        bool spit = record(call).spit_payload;
        if (feedback)
            rep.update(caller, reputation_event::Feedback{*feedback}, now());
        else if (options_.simulated_feedback && spit && !call.relay_to)
            rep.update(caller, reputation_event::Feedback{-1}, now());
        settle_hold(call, options_.simulated_feedback && spit);
    }

    void settle_hold(Call& call, bool spit) {
        auto& hold = record(call).hold_id;
        if (!hold.empty() && stores_.ledger.is_open(hold)) stores_.ledger.settle(hold, spit);
    }

    // --- other requests -----------------------------------------------------

    void on_options(const net::Address& from, const sip::SipMessage& msg) {
        auto attempt = CallAttempt::from(msg, from, now());
        records_.push_back(new_record(msg.call_id(), "OPTIONS", attempt, now()));
        auto& r = records_.back();
        auto out = chain_.run(attempt);
        auto tag = "d" + std::to_string(++tags_);
        if (out.verdict.is_quarantine()) {
            r.outcome = RecordOutcome::Quarantined;
            r.verdict = out.verdict.str();
            r.gate = chain_.gate(out.gate).name();
            r.final_status = 200;
            reply(from, msg, 200, tag);
            return;
        }
        if (out.verdict.is_reject()) {
            r.outcome = RecordOutcome::Rejected;
            r.verdict = out.verdict.str();
            r.gate = chain_.gate(out.gate).name();
            r.final_status = out.verdict.status;
            reply(from, msg, out.verdict.status, tag);
            return;
        }
        r.verdict = "Forward";
        int status = 200;
        if (!options_.options_always_200 && options_.role == EndpointRole::Proxy) {
            auto user = options_.users.find(attempt.callee);
            if (user == options_.users.end())
                status = 404;
            else if (!user->second.online && !stores_.registrar.lookup(attempt.callee, now()))
                status = 480;
        }
        r.final_status = status;
        reply(from, msg, status, tag);
    }

    void on_register(const net::Address& from, const sip::SipMessage& msg) {
        if (options_.role != EndpointRole::Proxy) {
            reply(from, msg, 405);
            return;
        }
        auto aor = identity_of(msg.to_uri());
        if (!options_.users.count(aor)) {
            reply(from, msg, 404);
            return;
        }
        if (!msg.header("Contact")) {
            // query: report the current binding without changing it
            auto r = response_to(msg, 200, "r" + std::to_string(++tags_));
            if (auto bound = stores_.registrar.lookup(aor, now()))
                r.add_header("Contact", "<sip:" + aor.substr(0, aor.find('@')) + "@" + bound->str() + ">");
            send(from, std::move(r));
            return;
        }
        TimeMs expires = options_.default_expires_ms;
        if (auto e = msg.header("Expires"))
            if (auto v = parse_number(*e)) expires = static_cast<TimeMs>(*v * 1000);
        auto contact = contact_address(msg).value_or(from);
        if (expires <= 0)
            stores_.registrar.unbind(aor, now());
        else
            stores_.registrar.bind(aor, contact, expires, now());
        auto r = response_to(msg, 200, "r" + std::to_string(++tags_));
        if (auto c = msg.header("Contact")) r.add_header("Contact", std::string(*c));
        r.add_header("Expires", std::to_string(expires / 1000));
        send(from, std::move(r));
    }

    void on_other(const net::Address& from, const sip::SipMessage& msg) {
        const auto* ruri = msg.request_uri();
        if (options_.role == EndpointRole::Proxy && ruri) {
            if (auto contact = stores_.registrar.lookup(ruri->identity(), now())) {
                transactions_[msg.call_id()] = {from, *contact};
                transport_.send(*contact, sip::serialize(msg));
                return;
            }
        }
        reply(from, msg, msg.method() == "INFO" || msg.method() == "BYE" ? 481 : 404);
    }
};

DefenseEndpoint::DefenseEndpoint(net::Transport& transport, DefenseStores& stores, Chain chain,
                                 EndpointOptions options)
    : impl_(std::make_unique<Impl>(transport, stores, std::move(chain), std::move(options))) {}

DefenseEndpoint::~DefenseEndpoint() = default;

net::Address DefenseEndpoint::address() const { return impl_->transport_.local(); }
const EndpointOptions& DefenseEndpoint::options() const { return impl_->options_; }
Chain& DefenseEndpoint::chain() { return impl_->chain_; }
DefenseStores& DefenseEndpoint::stores() { return impl_->stores_; }
std::vector<DefenseRecord> DefenseEndpoint::records() const { return impl_->records_; }
int DefenseEndpoint::established() const { return impl_->established_; }
int DefenseEndpoint::answered_total() const { return impl_->answered_total_; }

}  // namespace sxsm::defenses
