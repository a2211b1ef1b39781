#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sxsm/net/transport.hpp"
#include "sxsm/scenario/scenario.hpp"

namespace sxsm::engine {

class PlanInvalid : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Calls per second as an exact fraction num/den.
struct Rate {
    std::int64_t num = 1;
    std::int64_t den = 1;

    static Rate per_second(std::int64_t n) { return {n, 1}; }
    static Rate per_hour(std::int64_t n) { return {n, 3600}; }
    /// "10", "2/1", "5/3600".
    static Rate parse(std::string_view text);
    std::string str() const;

    /// Offset of the i-th call start from the entry start, rounded to ms.
    net::TimeMs start_offset_ms(std::int64_t i) const;
    double per_second_value() const { return static_cast<double>(num) / static_cast<double>(den); }

    friend bool operator==(const Rate&, const Rate&) = default;
};

struct ShootEntry {
    scenario::Bundle bundle;
    Rate rate;
    int max_calls = 1;
    /// Where the scenario came from, for reports and saved plans.
    std::string scenario_ref;
};

enum class Route {
    /// Every call goes to the plan's remote address.
    Proxy,
    /// Each call goes to the host:port of its target row.
    Direct,
};

/// Rate-controlled list of scenarios against one target.
///
/// Caller rows bind field0 (display name), field1 (user), field2 (host);
/// target rows bind target_user, target_host and target_port.
struct ShootPlan {
    std::vector<ShootEntry> entries;
    net::Address remote{"127.0.0.1", 5060};
    net::Address local{"127.0.0.1", 5061};
    scenario::InjectionTable callers;
    scenario::InjectionTable targets;
    Route route = Route::Proxy;
    std::string domain = "example.com";
    net::TimeMs global_timeout_ms = 300'000;
    net::TimeMs recv_timeout_ms = 4'000;
    /// Prepended to every Call-ID so that traffic can be attributed later.
    std::string call_id_prefix = "sxsm-";

    /// Throws PlanInvalid.
    void validate() const;
};

/// One caller row for a fixed URI: display name, user, host.
std::vector<std::string> caller_row(const sip::SipUri& uri, const std::string& display = {});
/// One target row: user, host, port.
std::vector<std::string> target_row(const sip::SipUri& uri, std::uint16_t default_port = 5060);

/// Reads a plan file. Relative paths resolve against the plan's directory;
/// a scenario reference that is not a file is looked up as
/// `<library>/scenarios/<ref>.xml`. Throws PlanInvalid or ScenarioError.
ShootPlan load_plan(const std::filesystem::path& path);

/// Writes plan.xml, callers.csv, targets.csv and every bundle into `dir`
/// (which also becomes the plan's library). Returns the plan path.
std::filesystem::path save_plan(const ShootPlan& plan, const std::filesystem::path& dir);

}  // namespace sxsm::engine
