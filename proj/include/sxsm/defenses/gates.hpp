#pragma once

#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sxsm/defenses/challenges.hpp"
#include "sxsm/defenses/fingerprint_db.hpp"
#include "sxsm/defenses/lists.hpp"
#include "sxsm/defenses/reputation.hpp"
#include "sxsm/ids/cpt.hpp"
#include "sxsm/ids/honeypot.hpp"

namespace sxsm::defenses {

/// The caller's reply to a challenge.
struct ChallengeAnswer {
    /// INFO body text ("answer=12345", "preimage=<hex>").
    std::string text;
    /// Active fingerprinting results.
    std::vector<ProbeObservation> probes;
};

class Gate {
public:
    virtual ~Gate() = default;

    virtual std::string name() const = 0;
    virtual Verdict check(CallAttempt& attempt) = 0;

    /// Resolves a challenge this gate issued into Forward or Reject.
    virtual Verdict verify(const CallAttempt& attempt, const Verdict& challenge, const ChallengeAnswer& answer);

    /// Adds the challenge to the provisional response sent to the caller.
    virtual void render_challenge(const Verdict& challenge, sip::SipMessage& response) const;

    /// A challenge issued by a later gate was passed.
    virtual void on_challenge_passed(const CallAttempt&) {}

    /// Every request the endpoint receives and every response it sends,
    /// attributed to the From identity.
    virtual void observe(const std::string& party, ids::Direction direction, TimeMs time, const sip::SipMessage& msg);

    virtual bool applies_to(std::string_view method) const { return method == "INVITE"; }

    bool skip_trusted = false;
};

class ListGate : public Gate {
public:
    explicit ListGate(ListStore& store, bool promote_on_challenge_pass = false)
        : store_(store), promote_(promote_on_challenge_pass) {}
    std::string name() const override { return "lists"; }
    Verdict check(CallAttempt& attempt) override;
    void on_challenge_passed(const CallAttempt& attempt) override;

private:
    ListStore& store_;
    bool promote_;
};

class PassiveFingerprintGate : public Gate {
public:
    explicit PassiveFingerprintGate(const FingerprintDb& db) : db_(db) {}
    std::string name() const override { return "passive_fp"; }
    Verdict check(CallAttempt& attempt) override { return passive_check(attempt.msg, db_); }

private:
    const FingerprintDb& db_;
};

/// Issues Challenge(Probe); the endpoint sends the probes and calls verify
/// with the observations.
class ActiveFingerprintGate : public Gate {
public:
    explicit ActiveFingerprintGate(const FingerprintDb& db) : db_(db) {}
    std::string name() const override { return "active_fp"; }
    Verdict check(CallAttempt& attempt) override;
    Verdict verify(const CallAttempt&, const Verdict&, const ChallengeAnswer& answer) override;
    const FingerprintDb& db() const { return db_; }

private:
    const FingerprintDb& db_;
};

/// Reputation check; a Challenge(Payment) places an automatic hold when a
/// ledger is attached, and becomes Reject(402) when the caller cannot pay.
class ReputationGate : public Gate {
public:
    ReputationGate(ReputationStore& store, ReputationThresholds thresholds, PaymentLedger* ledger = nullptr,
                   std::int64_t amount = 1000)
        : store_(store), thresholds_(thresholds), ledger_(ledger), amount_(amount) {}
    std::string name() const override { return "reputation"; }
    Verdict check(CallAttempt& attempt) override;

private:
    ReputationStore& store_;
    ReputationThresholds thresholds_;
    PaymentLedger* ledger_;
    std::int64_t amount_;
};

class TuringGate : public Gate {
public:
    explicit TuringGate(TuringChallenges& challenges) : challenges_(challenges) {}
    std::string name() const override { return "turing"; }
    Verdict check(CallAttempt& attempt) override;
    Verdict verify(const CallAttempt& attempt, const Verdict& challenge, const ChallengeAnswer& answer) override;
    /// X-Challenge: turing; the digits travel in the body as "digits=NNNNN".
    void render_challenge(const Verdict& challenge, sip::SipMessage& response) const override;

private:
    TuringChallenges& challenges_;
};

class PuzzleGate : public Gate {
public:
    explicit PuzzleGate(PuzzleChallenges& challenges) : challenges_(challenges) {}
    std::string name() const override { return "puzzle"; }
    Verdict check(CallAttempt& attempt) override;
    Verdict verify(const CallAttempt& attempt, const Verdict& challenge, const ChallengeAnswer& answer) override;
    /// X-Challenge: puzzle;bits=k;image=<hex>
    void render_challenge(const Verdict& challenge, sip::SipMessage& response) const override;

private:
    PuzzleChallenges& challenges_;
    std::map<std::string, Puzzle> issued_;
};

class PaymentGate : public Gate {
public:
    PaymentGate(PaymentLedger& ledger, std::int64_t amount) : ledger_(ledger), amount_(amount) {}
    std::string name() const override { return "payment"; }
    Verdict check(CallAttempt& attempt) override {
        return payment_hold(attempt.caller, attempt.callee, amount_, ledger_);
    }

private:
    PaymentLedger& ledger_;
    std::int64_t amount_;
};

/// Bayesian classification of the caller's recent traffic. A call is
/// flagged when 1 - P(Normal) reaches the threshold.
class IdsGate : public Gate {
public:
    enum class Action { Quarantine, Reject };

    IdsGate(ids::CptModel model, TimeMs window_ms = 60'000, double threshold = 0.8, Action action = Action::Quarantine)
        : model_(std::move(model)), window_ms_(window_ms), threshold_(threshold), action_(action) {}
    std::string name() const override { return "ids"; }
    Verdict check(CallAttempt& attempt) override;
    void observe(const std::string& party, ids::Direction direction, TimeMs time, const sip::SipMessage& msg) override;

    /// Posterior over the caller's current window.
    ids::Posterior posterior(const std::string& party, TimeMs now);

private:
    std::deque<ids::TraceEvent>& trim(const std::string& party, TimeMs now);

    ids::CptModel model_;
    TimeMs window_ms_;
    double threshold_;
    Action action_;
    std::map<std::string, std::deque<ids::TraceEvent>> traces_;
};

/// INVITE/OPTIONS to identities outside the assigned space are quarantined
/// and logged.
class HoneypotGate : public Gate {
public:
    HoneypotGate(ids::HoneypotSpace space, ids::HoneypotLog& log) : space_(std::move(space)), log_(log) {
        space_.validate();
    }
    std::string name() const override { return "honeypot"; }
    Verdict check(CallAttempt& attempt) override;
    bool applies_to(std::string_view method) const override { return method == "INVITE" || method == "OPTIONS"; }
    const ids::HoneypotSpace& space() const { return space_; }

private:
    ids::HoneypotSpace space_;
    ids::HoneypotLog& log_;
};

/// Ordered gates; the first non-Forward verdict wins.
class Chain {
public:
    struct Outcome {
        Verdict verdict;
        /// Deciding gate, or size() when every gate forwarded.
        std::size_t gate = 0;
    };

    void add(std::unique_ptr<Gate> gate) { gates_.push_back(std::move(gate)); }
    std::size_t size() const { return gates_.size(); }
    bool empty() const { return gates_.empty(); }
    Gate& gate(std::size_t i) { return *gates_.at(i); }
    /// First gate of the given name, or nullptr.
    Gate* find(const std::string& name);

    /// Evaluates gates [from, size()) that apply to the attempt's method.
    Outcome run(CallAttempt& attempt, std::size_t from = 0);

    /// Resolves the challenge issued by gate `index`; on success the gates
    /// before it are notified.
    Verdict verify(std::size_t index, const CallAttempt& attempt, const Verdict& challenge,
                   const ChallengeAnswer& answer);

    void observe(const std::string& party, ids::Direction direction, TimeMs time, const sip::SipMessage& msg);

private:
    std::vector<std::unique_ptr<Gate>> gates_;
};

}  // namespace sxsm::defenses
