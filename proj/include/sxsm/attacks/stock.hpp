#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "sxsm/engine/engine.hpp"
#include "sxsm/scenario/scenario.hpp"

namespace sxsm::attacks {

/// Name of the built-in template set.
inline constexpr const char* kStockSet = "std";

/// Built-in message templates. Caller rows bind field1/field2 (user, host).
///
/// invite, ack, ack_spit, ack_failed, bye, cancel, info_challenge,
/// options, register_query, register_bind, resp_180, resp_200,
/// resp_200_plain, resp_202.
const std::map<std::string, scenario::MessageTemplate>& stock_templates();

/// Bundle of `sc` with the stock templates it references.
scenario::Bundle stock_bundle(scenario::Scenario sc);

struct SpitCallOptions {
    /// How long the "media" lasts before BYE.
    int media_ms = 3000;
    /// ACK carries an X-SPIT-Payload marker.
    bool payload = true;
    /// Answer 183 challenges with info_challenge; the engine then needs
    /// the bindings of challenge_answers().
    bool answer_challenges = false;
};

/// Caller: INVITE, optionally answer a 183 challenge with info_challenge, ACK
/// (with payload) on 200, hold, BYE. Failure finals abort the call.
scenario::Scenario spit_call_scenario(const SpitCallOptions& options = {});

/// Caller that waits for the callee to hang up after answering.
scenario::Scenario caller_awaiting_bye_scenario();

/// Callee: answers an INVITE with 180/200, waits for ACK, holds
/// `hold_ms` and hangs up with `bye_text` (inline BYE template).
scenario::Scenario answering_scenario(int hold_ms, const std::string& bye_text);

/// Binds the caller row's identity (field1@field2) to the engine's own
/// address.
scenario::Scenario register_scenario();

/// Probe method of a scan.
enum class ProbeMethod { Invite, Options, Register };

std::string_view to_string(ProbeMethod probe);
ProbeMethod probe_from_string(std::string_view text);

/// One probe per call; a ringing INVITE is cancelled and an answered one
/// torn down with ACK/BYE.
scenario::Scenario scan_scenario(ProbeMethod probe);

// --- challenge answers --------------------------------------------------------

class ChallengeFormatUnknown : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ChallengeInfo {
    enum class Kind { Turing, Puzzle } kind = Kind::Turing;
    std::string digits;
    int bits = 0;
    std::string image_hex;
};

/// Reads the X-Challenge header (and digit body) of a provisional response.
/// Throws ChallengeFormatUnknown.
ChallengeInfo parse_challenge(const sip::SipMessage& response);

enum class SolverSkill {
    /// Solves puzzles, cannot hear digits.
    Bot,
    /// Solves both.
    Human,
};

/// Computed bindings `turing_answer` and `puzzle_preimage` for
/// info_challenge. A bot answers every Turing test with "00000".
std::map<std::string, engine::ComputedBinding> challenge_answers(SolverSkill skill);

}  // namespace sxsm::attacks
