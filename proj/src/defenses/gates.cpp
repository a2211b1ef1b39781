#include "sxsm/defenses/gates.hpp"

#include <boost/algorithm/string/trim.hpp>

namespace sxsm::defenses {

namespace {

/// Value of "key=value" in an INFO body, trimmed; empty when absent.
std::string body_value(const std::string& body, const std::string& key) {
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto eol = body.find('\n', pos);
        auto line = body.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        boost::algorithm::trim(line);
        if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    return {};
}

}  // namespace

Verdict Gate::verify(const CallAttempt&, const Verdict&, const ChallengeAnswer&) {
    return Verdict::reject(403, name() + ": unexpected challenge answer");
}

void Gate::render_challenge(const Verdict& challenge, sip::SipMessage& response) const {
    response.add_header("X-Challenge", std::string(to_string(challenge.challenge)));
}

void Gate::observe(const std::string&, ids::Direction, TimeMs, const sip::SipMessage&) {}

Verdict ListGate::check(CallAttempt& attempt) {
    auto v = store_.check(attempt.caller, attempt.callee, attempt.now);
    if (v.is_forward() && store_.is_white(attempt.callee, attempt.caller)) attempt.trusted = true;
    return v;
}

void ListGate::on_challenge_passed(const CallAttempt& attempt) {
    if (promote_ && !store_.is_black(attempt.callee, attempt.caller)) store_.approve(attempt.callee, attempt.caller);
}

Verdict ActiveFingerprintGate::check(CallAttempt& attempt) {
    return Verdict::challenge_with(ChallengeKind::Probe, attempt.msg.call_id());
}

Verdict ActiveFingerprintGate::verify(const CallAttempt&, const Verdict&, const ChallengeAnswer& answer) {
    return active_verdict(answer.probes, db_);
}

Verdict ReputationGate::check(CallAttempt& attempt) {
    auto v = store_.check(attempt.caller, thresholds_, attempt.now);
    if (v.is_challenge() && ledger_) return payment_hold(attempt.caller, attempt.callee, amount_, *ledger_);
    return v;
}

Verdict TuringGate::check(CallAttempt& attempt) {
    auto key = attempt.msg.call_id();
    challenges_.issue(key, attempt.now);
    return Verdict::challenge_with(ChallengeKind::Turing, key);
}

Verdict TuringGate::verify(const CallAttempt& attempt, const Verdict& challenge, const ChallengeAnswer& answer) {
    try {
        return challenges_.verify(challenge.token, body_value(answer.text, "answer"), attempt.now);
    } catch (const ExpiredToken&) {
        return Verdict::reject(403, "turing expired");
    } catch (const UnknownToken&) {
        return Verdict::reject(403, "turing unknown token");
    }
}

void TuringGate::render_challenge(const Verdict& challenge, sip::SipMessage& response) const {
    response.add_header("X-Challenge", "turing");
    response.body = "digits=" + challenges_.digits(challenge.token) + "\r\n";
    response.add_header("Content-Type", "text/plain");
}

Verdict PuzzleGate::check(CallAttempt& attempt) {
    auto key = attempt.msg.call_id();
    issued_[key] = challenges_.issue(key);
    return Verdict::challenge_with(ChallengeKind::Puzzle, key);
}

Verdict PuzzleGate::verify(const CallAttempt&, const Verdict& challenge, const ChallengeAnswer& answer) {
    issued_.erase(challenge.token);
    try {
        return challenges_.verify(challenge.token, from_hex(body_value(answer.text, "preimage")));
    } catch (const UnknownToken&) {
        return Verdict::reject(403, "puzzle unknown token");
    } catch (const std::invalid_argument&) {
        return Verdict::reject(403, "puzzle");
    }
}

void PuzzleGate::render_challenge(const Verdict& challenge, sip::SipMessage& response) const {
    const auto& p = issued_.at(challenge.token);
    response.add_header("X-Challenge", "puzzle;bits=" + std::to_string(p.bits) + ";image=" + to_hex(p.image));
}

std::deque<ids::TraceEvent>& IdsGate::trim(const std::string& party, TimeMs now) {
    auto& q = traces_[party];
    while (!q.empty() && q.front().time <= now - window_ms_) q.pop_front();
    return q;
}

void IdsGate::observe(const std::string& party, ids::Direction direction, TimeMs time, const sip::SipMessage& msg) {
    if (party.empty()) return;
    trim(party, time).push_back(ids::TraceEvent{time, direction, msg});
}

ids::Posterior IdsGate::posterior(const std::string& party, TimeMs now) {
    auto& q = trim(party, now);
    std::vector<ids::TraceEvent> events(q.begin(), q.end());
    return ids::infer(ids::extract_window(events, static_cast<double>(window_ms_) / 1000.0), model_);
}

Verdict IdsGate::check(CallAttempt& attempt) {
    auto post = posterior(attempt.caller, attempt.now);
    auto normal = post.count("Normal") ? post.at("Normal") : 0.0;
    if (1.0 - normal < threshold_) return Verdict::forward();
    return action_ == Action::Quarantine ? Verdict::quarantine() : Verdict::reject(403, "ids");
}

Verdict HoneypotGate::check(CallAttempt& attempt) {
    const auto* ruri = attempt.msg.request_uri();
    if (!ruri || space_.route(*ruri) == ids::Route::Normal) return Verdict::forward();
    log_.append({attempt.now, attempt.caller, attempt.source.str(), std::string(attempt.msg.method()), ruri->str()});
    return Verdict::quarantine();
}

Gate* Chain::find(const std::string& name) {
    for (auto& g : gates_)
        if (g->name() == name) return g.get();
    return nullptr;
}

Chain::Outcome Chain::run(CallAttempt& attempt, std::size_t from) {
    auto method = attempt.msg.method();
    for (std::size_t i = from; i < gates_.size(); ++i) {
        auto& g = *gates_[i];
        if (!g.applies_to(method)) continue;
        if (attempt.trusted && g.skip_trusted) continue;
        auto v = g.check(attempt);
        if (!v.is_forward()) return {v, i};
    }
    return {Verdict::forward(), gates_.size()};
}

Verdict Chain::verify(std::size_t index, const CallAttempt& attempt, const Verdict& challenge,
                      const ChallengeAnswer& answer) {
    auto v = gates_.at(index)->verify(attempt, challenge, answer);
    if (v.is_forward())
        for (std::size_t i = 0; i < index; ++i) gates_[i]->on_challenge_passed(attempt);
    return v;
}

void Chain::observe(const std::string& party, ids::Direction direction, TimeMs time, const sip::SipMessage& msg) {
    for (auto& g : gates_) g->observe(party, direction, time, msg);
}

}  // namespace sxsm::defenses
