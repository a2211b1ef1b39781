#include "sxsm/attacks/spit.hpp"

#include <algorithm>

#include <boost/algorithm/string.hpp>

namespace sxsm::attacks {

namespace {

engine::ShootPlan base_plan(const SpitPlanSpec& spec, std::size_t calls) {
    engine::ShootPlan plan;
    plan.entries.push_back(
        {spec.bundle, spec.rate, static_cast<int>(std::max<std::size_t>(calls, 1)), spec.scenario_ref});
    plan.remote = spec.proxy;
    plan.local = spec.local;
    plan.route = spec.mode == SpitMode::ViaProxy ? engine::Route::Proxy : engine::Route::Direct;
    plan.global_timeout_ms =
        std::max<net::TimeMs>(plan.global_timeout_ms, spec.rate.start_offset_ms(static_cast<std::int64_t>(calls)) +
                                                          plan.global_timeout_ms);
    plan.call_id_prefix = "spit-";
    return plan;
}

}  // namespace

std::string_view to_string(SpitMode mode) { return mode == SpitMode::ViaProxy ? "via-proxy" : "direct-ip"; }

SpitMode spit_mode_from_string(std::string_view text) {
    auto t = boost::to_lower_copy(std::string(text));
    if (t == "via-proxy" || t == "proxy") return SpitMode::ViaProxy;
    if (t == "direct-ip" || t == "direct") return SpitMode::DirectIp;
    throw std::invalid_argument("mode must be via-proxy or direct-ip: " + std::string(text));
}

engine::ShootPlan build_spit_plan(const UriInventory& inventory, const SpitPlanSpec& spec) {
    if (spec.callers.identities.empty()) throw ModeInventoryMismatch("no caller identity configured");
    if (spec.mode == SpitMode::ViaProxy && spec.callers.kind != CallerSource::Kind::Fixed)
        throw ModeInventoryMismatch("SPIT via a proxy needs valid accounts");

    std::vector<std::vector<std::string>> targets;
    for (const auto& e : inventory.assigned()) {
        bool fits = spec.mode == SpitMode::ViaProxy ? e.uri.is_permanent() : e.uri.is_temporary();
        if (!fits)
            throw ModeInventoryMismatch(std::string(to_string(spec.mode)) + " cannot reach " + e.uri.str());
        targets.push_back(engine::target_row(e.uri, spec.mode == SpitMode::ViaProxy ? spec.proxy.port : 5060));
    }
    auto plan = base_plan(spec, targets.size());
    std::vector<std::vector<std::string>> callers;
    for (const auto& id : spec.callers.identities) callers.push_back(engine::caller_row(id));
    plan.callers = scenario::InjectionTable(std::move(callers));
    plan.targets = scenario::InjectionTable(std::move(targets));
    if (!inventory.assigned().empty()) plan.domain = inventory.assigned().front().uri.host;
    return plan;
}

std::size_t AccountPartition::target_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.targets.size();
    return n;
}

AccountPartition partition_accounts(const std::vector<sip::SipUri>& targets, const std::vector<sip::SipUri>& accounts) {
    if (accounts.empty()) throw NoAccounts("account switching needs at least one account");
    AccountPartition p;
    for (const auto& a : accounts) p.groups.push_back({a, {}});
    for (std::size_t i = 0; i < targets.size(); ++i) p.groups[i % accounts.size()].targets.push_back(targets[i]);
    return p;
}

engine::ShootPlan account_switching_plan(const AccountPartition& partition, const SpitPlanSpec& spec) {
    if (partition.groups.empty()) throw NoAccounts("empty partition");
    std::vector<std::vector<std::string>> callers, targets;
    std::size_t longest = 0;
    for (const auto& g : partition.groups) longest = std::max(longest, g.targets.size());
    for (std::size_t round = 0; round < longest; ++round)
        for (const auto& g : partition.groups) {
            if (round >= g.targets.size()) continue;
            callers.push_back(engine::caller_row(g.account));
            targets.push_back(engine::target_row(g.targets[round], spec.proxy.port));
        }
    auto s = spec;
    s.mode = SpitMode::ViaProxy;
    auto plan = base_plan(s, targets.size());
    if (callers.empty()) callers.push_back(engine::caller_row(partition.groups.front().account));
    plan.callers = scenario::InjectionTable(std::move(callers));
    plan.targets = scenario::InjectionTable(std::move(targets));
    return plan;
}

CallerSource imported_white_list(defenses::ListStore& lists, const sip::SipUri& attacker, const sip::SipUri& victim) {
    lists.add_white(attacker.identity(), victim.identity());
    std::vector<sip::SipUri> ids;
    for (const auto& friend_id : lists.shared_white_list(attacker.identity(), victim.identity()))
        if (auto uri = sip::SipUri::try_parse("sip:" + friend_id)) ids.push_back(*uri);
    return CallerSource::spoofed(std::move(ids));
}

}  // namespace sxsm::attacks
