#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sxsm/defenses/gates.hpp"
#include "sxsm/defenses/registrar.hpp"
#include "sxsm/net/transport.hpp"

namespace sxsm::defenses {

/// Every store a chain's gates may use, owned in one place.
struct DefenseStores {
    DefenseStores(std::uint64_t seed = 1, int puzzle_bits = 16, TimeMs challenge_expiry_ms = 30'000,
                  ListStore::Options list_options = {}, ReputationWeights weights = {})
        : lists(list_options), reputation(weights), turing(seed, challenge_expiry_ms), puzzles(seed ^ 0x5bd1e995, puzzle_bits) {}

    ListStore lists;
    ReputationStore reputation;
    PaymentLedger ledger;
    TuringChallenges turing;
    PuzzleChallenges puzzles;
    FingerprintDb fingerprints;
    ids::HoneypotLog honeypot;
    Registrar registrar;
};

enum class EndpointRole { Proxy, Phone };

/// Behavior of a user the endpoint answers for.
struct SimulatedUser {
    bool online = true;
    /// Delay between 180 Ringing and 200 OK.
    TimeMs ring_ms = 2000;
};

enum class RecordOutcome { Forwarded, Rejected, Challenged, Quarantined };

std::string_view to_string(RecordOutcome outcome);

/// One out-of-dialog INVITE or OPTIONS seen by the endpoint.
struct DefenseRecord {
    std::string call_id;
    std::string method;
    std::string caller;
    std::string callee;
    std::string source;
    TimeMs time_ms = 0;
    /// Challenged means still unresolved.
    RecordOutcome outcome = RecordOutcome::Forwarded;
    std::string verdict;
    /// Gate that rejected, quarantined or still challenges the call.
    std::string gate;
    bool challenged = false;
    int final_status = 0;
    bool answered = false;
    bool spit_payload = false;
    std::string hold_id;
};

struct EndpointOptions {
    EndpointRole role = EndpointRole::Proxy;
    std::string domain = "example.com";
    /// Assigned identities (user@domain). A registered contact takes
    /// precedence over the simulated behavior.
    std::map<std::string, SimulatedUser> users;
    /// Phone role: how the phone's user behaves; any Request-URI reaches it.
    SimulatedUser phone_user;
    /// Answer every OPTIONS with 200, assigned or not.
    bool options_always_200 = false;
    /// INVITEs claiming a local identity must come from its registered
    /// contact.
    bool authenticate_source = false;
    /// BYE header a callee uses to rate the caller.
    std::string feedback_header = "X-Reputation";
    /// Simulated users rate callers -1 and report payment holds as SPIT
    /// when the call delivered a SPIT payload.
    bool simulated_feedback = true;
    TimeMs probe_timeout_ms = 2000;
    TimeMs default_expires_ms = 3'600'000;
};

/// SIP proxy (or phone) that runs every incoming call attempt through a
/// gate chain and then answers, relays, rejects or quarantines it.
class DefenseEndpoint {
public:
    DefenseEndpoint(net::Transport& transport, DefenseStores& stores, Chain chain, EndpointOptions options);
    ~DefenseEndpoint();
    DefenseEndpoint(const DefenseEndpoint&) = delete;
    DefenseEndpoint& operator=(const DefenseEndpoint&) = delete;

    net::Address address() const;
    const EndpointOptions& options() const;
    Chain& chain();
    DefenseStores& stores();

    std::vector<DefenseRecord> records() const;
    /// Calls currently established (answered, not yet ended).
    int established() const;
    /// Calls that were answered at some point.
    int answered_total() const;

private:
    class Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sxsm::defenses
