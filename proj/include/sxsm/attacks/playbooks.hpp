#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sxsm/attacks/stock.hpp"
#include "sxsm/defenses/registrar.hpp"
#include "sxsm/engine/plan.hpp"
#include "sxsm/net/transport.hpp"

namespace sxsm::attacks {

class SameAccount : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SolverUnreachable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- ringtone SPIT -------------------------------------------------------------

/// INVITE with `Alert-Info: <alert_url>`; CANCEL as soon as it rings, ACK
/// and BYE when answered right away.
scenario::Scenario ringtone_spit_scenario(const std::string& alert_url);

// --- reputation pushing ---------------------------------------------------------

struct ReputationPushSpec {
    /// Accounts that receive the calls and rate the caller.
    std::vector<sip::SipUri> receivers;
    sip::SipUri boosted;
    std::string feedback_header = "X-Reputation";
    std::string value = "+1";
    /// How long a receiver keeps each call before hanging up.
    int hold_ms = 10'000;
    int calls_per_receiver = 1;
    engine::Rate rate = engine::Rate::per_second(1);
    net::Address proxy{"127.0.0.1", 5060};
    net::Address caller_local{"127.0.0.1", 5071};
    net::Address receiver_local{"127.0.0.1", 5072};
};

/// Two plans meant to run at the same time against one proxy: `receiver`
/// answers and hangs up with the feedback header, `caller` places the
/// calls from the boosted identity. `registration` binds every receiver to
/// receiver_local and must run (on the receiver's transport) first.
struct ReputationPush {
    engine::ShootPlan registration;
    engine::ShootPlan receiver;
    engine::ShootPlan caller;
};

/// Needs two distinct accounts at least. Throws SameAccount when the
/// boosted identity is also a receiver.
ReputationPush reputation_push(const ReputationPushSpec& spec);

// --- CAPTCHA relay ---------------------------------------------------------------

/// Calls the victim; when challenged, REFERs the challenge to `solver`
/// through the proxy (Refer-To carries the challenged Call-ID) and waits
/// for the call to go through. A failed REFER leaves the challenge to
/// expire. Without a challenge it is a plain SPIT call.
scenario::Scenario captcha_relay(const sip::SipUri& victim, const sip::SipUri& solver,
                                 const SpitCallOptions& call = {});

/// Throws SolverUnreachable unless the solver has a current binding.
void require_solver(const defenses::Registrar& registrar, const sip::SipUri& solver, net::TimeMs now);

/// A person who answers relayed challenges: registers at the proxy,
/// accepts every REFER, listens to the challenge and answers it.
class HumanSolver {
public:
    HumanSolver(net::Transport& transport, sip::SipUri identity, net::Address proxy);

    void register_now();
    int solved() const { return solved_; }
    int referrals() const { return referrals_; }

private:
    void on_message(const net::Address& from, const std::string& bytes);
    void send_info(const net::Address& to, const std::string& call_id, const std::string& body);

    net::Transport& transport_;
    sip::SipUri identity_;
    net::Address proxy_;
    int cseq_ = 0;
    int solved_ = 0;
    int referrals_ = 0;
};

// --- registration hijacking -------------------------------------------------------

/// REGISTER `target` -> `contact` every `interval_ms` until stopped.
scenario::Scenario registration_race(const sip::SipUri& target, const net::Address& contact, int interval_ms);

/// Single-entry plan running `race` once (one endless call).
engine::ShootPlan registration_race_plan(scenario::Scenario race, const net::Address& proxy,
                                         const net::Address& local);

}  // namespace sxsm::attacks
