#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "sxsm/attacks/inventory.hpp"
#include "sxsm/defenses/lists.hpp"
#include "sxsm/engine/plan.hpp"

namespace sxsm::attacks {

class ModeInventoryMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NoAccounts : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class SpitMode {
    /// Calls go through the provider's proxy from valid accounts.
    ViaProxy,
    /// Calls go straight to temporary URIs; any identity will do.
    DirectIp,
};

std::string_view to_string(SpitMode mode);
SpitMode spit_mode_from_string(std::string_view text);

/// Caller identities of a SPIT campaign, used round-robin.
struct CallerSource {
    enum class Kind {
        /// Accounts the attacker owns at the provider.
        Fixed,
        /// Identities the attacker merely claims.
        Spoofed,
    } kind = Kind::Fixed;
    std::vector<sip::SipUri> identities;

    static CallerSource fixed(std::vector<sip::SipUri> accounts) { return {Kind::Fixed, std::move(accounts)}; }
    static CallerSource spoofed(std::vector<sip::SipUri> ids) { return {Kind::Spoofed, std::move(ids)}; }
};

struct SpitPlanSpec {
    SpitMode mode = SpitMode::ViaProxy;
    scenario::Bundle bundle;
    engine::Rate rate = engine::Rate::per_second(1);
    CallerSource callers;
    net::Address proxy{"127.0.0.1", 5060};
    net::Address local{"127.0.0.1", 5061};
    std::string scenario_ref = "spit_call";
};

/// One call per assigned inventory entry. Throws ModeInventoryMismatch.
engine::ShootPlan build_spit_plan(const UriInventory& inventory, const SpitPlanSpec& spec);

/// Attacker account -> the targets only it calls.
struct AccountGroup {
    sip::SipUri account;
    std::vector<sip::SipUri> targets;
};

struct AccountPartition {
    std::vector<AccountGroup> groups;

    std::size_t target_count() const;
};

/// Round-robin: target i goes to account i mod n. Throws NoAccounts.
AccountPartition partition_accounts(const std::vector<sip::SipUri>& targets, const std::vector<sip::SipUri>& accounts);

/// Via-proxy plan whose k-th call uses the account owning its target. Call
/// order interleaves the groups.
engine::ShootPlan account_switching_plan(const AccountPartition& partition, const SpitPlanSpec& spec);

/// Identities the attacker can claim after importing `victim`'s white list:
/// the attacker first puts the victim on its own white list, then asks for
/// the victim's. Throws ListAccessDenied when sharing is off.
CallerSource imported_white_list(defenses::ListStore& lists, const sip::SipUri& attacker, const sip::SipUri& victim);

}  // namespace sxsm::attacks
