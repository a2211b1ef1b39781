#include "sxsm/defenses/verdict.hpp"

namespace sxsm::defenses {

std::string_view to_string(ChallengeKind kind) {
    switch (kind) {
    case ChallengeKind::Turing: return "Turing";
    case ChallengeKind::Puzzle: return "Puzzle";
    case ChallengeKind::Payment: return "Payment";
    case ChallengeKind::Probe: return "Probe";
    }
    return "?";
}

std::string Verdict::str() const {
    switch (kind) {
    case Kind::Forward: return "Forward";
    case Kind::Reject: return "Reject(" + std::to_string(status) + " " + reason + ")";
    case Kind::Challenge: return "Challenge(" + std::string(to_string(challenge)) + ")";
    case Kind::Quarantine: return "Quarantine";
    }
    return "?";
}

CallAttempt CallAttempt::from(sip::SipMessage msg, net::Address source, TimeMs now) {
    CallAttempt a;
    if (auto from = msg.from_uri()) a.caller = from->identity();
    if (const auto* ruri = msg.request_uri()) a.callee = ruri->identity();
    a.msg = std::move(msg);
    a.source = std::move(source);
    a.now = now;
    return a;
}

}  // namespace sxsm::defenses
