#pragma once

#include <string>
#include <string_view>

#include "sxsm/net/transport.hpp"
#include "sxsm/sip/message.hpp"

namespace sxsm::defenses {

using net::TimeMs;

enum class ChallengeKind { Turing, Puzzle, Payment, Probe };

std::string_view to_string(ChallengeKind kind);

struct Verdict {
    enum class Kind { Forward, Reject, Challenge, Quarantine };

    Kind kind = Kind::Forward;
    int status = 0;
    std::string reason;
    ChallengeKind challenge = ChallengeKind::Turing;
    /// Handle for the later verify call: the Turing/puzzle token key or the
    /// payment hold id.
    std::string token;

    static Verdict forward() { return {}; }
    static Verdict reject(int status, std::string reason) { return {Kind::Reject, status, std::move(reason), {}, {}}; }
    static Verdict challenge_with(ChallengeKind kind, std::string token) {
        return {Kind::Challenge, 0, {}, kind, std::move(token)};
    }
    static Verdict quarantine() { return {Kind::Quarantine, 0, "honeypot", {}, {}}; }

    bool is_forward() const { return kind == Kind::Forward; }
    bool is_reject() const { return kind == Kind::Reject; }
    bool is_challenge() const { return kind == Kind::Challenge; }
    bool is_quarantine() const { return kind == Kind::Quarantine; }

    /// "Forward", "Reject(603 blacklist)", "Challenge(Turing)", "Quarantine".
    std::string str() const;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// One incoming call attempt as the gates see it.
struct CallAttempt {
    sip::SipMessage msg;
    /// From identity (user@host).
    std::string caller;
    /// Request-URI identity.
    std::string callee;
    net::Address source;
    TimeMs now = 0;
    /// Set by a gate that vouches for the caller (white list); gates with
    /// skip_trusted then let the call pass.
    bool trusted = false;

    /// Fills caller/callee from the message.
    static CallAttempt from(sip::SipMessage msg, net::Address source, TimeMs now);
};

}  // namespace sxsm::defenses
