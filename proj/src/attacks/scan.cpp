#include "sxsm/attacks/scan.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <charconv>
#include <map>

#include <boost/algorithm/string.hpp>

namespace sxsm::attacks {

namespace {

std::int64_t to_int(std::string_view s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw InventoryError("not a number: " + std::string(s));
    return v;
}

std::uint32_t to_ipv4(const std::string& s) {
    in_addr a{};
    if (inet_pton(AF_INET, boost::trim_copy(s).c_str(), &a) != 1) throw InventoryError("not an IPv4 address: " + s);
    return ntohl(a.s_addr);
}

std::string from_ipv4(std::uint32_t v) {
    in_addr a{};
    a.s_addr = htonl(v);
    char buf[INET_ADDRSTRLEN];
    inet_ntop(AF_INET, &a, buf, sizeof buf);
    return buf;
}

/// Runs one scan plan and classifies each candidate by its call summary.
UriInventory run_scan(engine::ShootPlan plan, const std::vector<sip::SipUri>& candidates, ProbeMethod probe,
                      net::Transport& transport, const ScanOptions& options) {
    UriInventory inv;
    if (candidates.empty()) return inv;
    auto engine_options = options.engine;
    engine_options.keep_call_summaries = true;
    auto result = engine::execute(plan, transport, engine_options);

    std::map<std::string, const engine::CallSummary*> by_target;
    if (!result.entries.empty())
        for (const auto& c : result.entries.front().calls) by_target[c.target] = &c;
    for (const auto& uri : candidates) {
        InventoryEntry e{uri, sip::UriStatus::Indeterminate, std::string(to_string(probe)), transport.loop().now()};
        if (auto it = by_target.find(uri.user + "@" + uri.host); it != by_target.end()) {
            e.status = classify_call(*it->second);
            e.observed_at = it->second->ended_ms;
        }
        inv.add(std::move(e));
    }
    return inv;
}

engine::ShootPlan scan_plan(ProbeMethod probe, const ScanOptions& options, net::Transport& transport,
                            std::size_t candidates) {
    engine::ShootPlan plan;
    plan.entries.push_back({stock_bundle(scan_scenario(probe)), options.rate,
                            static_cast<int>(std::max<std::size_t>(candidates, 1)),
                            "scan_" + boost::to_lower_copy(std::string(to_string(probe)))});
    plan.local = transport.local();
    plan.callers = scenario::InjectionTable({engine::caller_row(sip::SipUri::parse(options.scanner_uri))});
    plan.recv_timeout_ms = options.recv_timeout_ms;
    // every candidate's probe must have had its chance
    plan.global_timeout_ms = options.rate.start_offset_ms(static_cast<std::int64_t>(candidates)) +
                             options.recv_timeout_ms * 4 + 10'000;
    plan.call_id_prefix = "scan-";
    return plan;
}

}  // namespace

UserRange UserRange::parse(std::string_view text) {
    std::string t = boost::trim_copy(std::string(text));
    UserRange r;
    if (auto dash = t.find('-'); dash != std::string::npos) {
        auto a = t.substr(0, dash), b = t.substr(dash + 1);
        if (a.size() != b.size()) throw InventoryError("range ends differ in length: " + t);
        r.digits = static_cast<int>(a.size());
        r.first = to_int(a);
        r.last = to_int(b);
        return r;
    }
    auto x = t.find_first_of("xX");
    if (x == std::string::npos || t.find_first_not_of("xX", x) != std::string::npos)
        throw InventoryError("user range must be A-B or prefix followed by x's: " + t);
    r.prefix = t.substr(0, x);
    r.digits = static_cast<int>(t.size() - x);
    if (r.digits > 12) throw InventoryError("user range too large: " + t);
    r.first = 0;
    r.last = 1;
    for (int i = 0; i < r.digits; ++i) r.last *= 10;
    --r.last;
    return r;
}

std::vector<std::string> UserRange::users() const {
    std::vector<std::string> out;
    for (auto n = first; n <= last; ++n) {
        auto s = std::to_string(n);
        if (static_cast<int>(s.size()) < digits) s.insert(0, static_cast<std::size_t>(digits) - s.size(), '0');
        out.push_back(prefix + s);
    }
    return out;
}

IpRange IpRange::parse(std::string_view text) {
    std::string t = boost::trim_copy(std::string(text));
    IpRange r;
    if (auto dash = t.find('-'); dash != std::string::npos) {
        r.first = to_ipv4(t.substr(0, dash));
        r.last = to_ipv4(t.substr(dash + 1));
        if (r.last < r.first) throw InventoryError("empty address range: " + t);
        return r;
    }
    if (auto slash = t.find('/'); slash != std::string::npos) {
        auto bits = to_int(t.substr(slash + 1));
        if (bits < 16 || bits > 32) throw InventoryError("prefix length must be 16..32: " + t);
        std::uint32_t mask = bits == 32 ? 0xffffffffu : ~((1u << (32 - bits)) - 1);
        std::uint32_t net = to_ipv4(t.substr(0, slash)) & mask;
        r.first = net;
        r.last = net | ~mask;
        if (bits <= 30) {
            ++r.first;
            --r.last;
        }
        return r;
    }
    r.first = r.last = to_ipv4(t);
    return r;
}

std::vector<std::string> IpRange::addresses() const {
    std::vector<std::string> out;
    for (std::uint64_t v = first; v <= last; ++v) out.push_back(from_ipv4(static_cast<std::uint32_t>(v)));
    return out;
}

sip::UriStatus classify_call(const engine::CallSummary& call) {
    for (int status : call.responses)
        if (status != 100) return sip::classify_response(status);
    return sip::UriStatus::Indeterminate;
}

UriInventory scan_permanent(const std::string& domain, const UserRange& users, ProbeMethod probe,
                            net::Transport& transport, const net::Address& proxy, const ScanOptions& options) {
    std::vector<sip::SipUri> candidates;
    std::vector<std::vector<std::string>> rows;
    for (const auto& u : users.users()) {
        candidates.push_back(sip::SipUri::parse("sip:" + u + "@" + domain));
        rows.push_back(engine::target_row(candidates.back(), proxy.port));
    }
    auto plan = scan_plan(probe, options, transport, candidates.size());
    plan.remote = proxy;
    plan.route = engine::Route::Proxy;
    plan.domain = domain;
    plan.targets = scenario::InjectionTable(std::move(rows));
    return run_scan(std::move(plan), candidates, probe, transport, options);
}

UriInventory scan_temporary(const IpRange& ips, std::uint16_t port, ProbeMethod probe, net::Transport& transport,
                            const ScanOptions& options) {
    if (probe == ProbeMethod::Register) throw InventoryError("temporary URIs are probed with INVITE or OPTIONS");
    std::vector<sip::SipUri> candidates;
    std::vector<std::vector<std::string>> rows;
    for (const auto& ip : ips.addresses()) {
        std::string uri = "sip:" + options.temporary_user + "@" + ip;
        if (port != 5060) uri += ":" + std::to_string(port);
        candidates.push_back(sip::SipUri::parse(uri));
        rows.push_back({options.temporary_user, ip, std::to_string(port)});
    }
    auto plan = scan_plan(probe, options, transport, candidates.size());
    plan.route = engine::Route::Direct;
    plan.targets = scenario::InjectionTable(std::move(rows));
    return run_scan(std::move(plan), candidates, probe, transport, options);
}

}  // namespace sxsm::attacks
