#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sxsm/engine/plan.hpp"
#include "sxsm/net/transport.hpp"

namespace sxsm::engine {

/// The five shoot-mode exit codes.
enum ExitCode : int {
    kAllSucceeded = 0,
    kCallFailed = 1,
    kStopped = 97,
    kNoCalls = 99,
    kFatal = -1,
};

enum class CallOutcome { Success, Aborted, Stopped };

std::string_view to_string(CallOutcome outcome);

struct CallSummary {
    std::string call_id;
    std::int64_t call_number = 0;
    /// target_user@target_host of the row the call used.
    std::string target;
    CallOutcome outcome = CallOutcome::Success;
    /// Status codes of every response the call consumed or buffered, in arrival order.
    std::vector<int> responses;
    net::TimeMs started_ms = 0;
    net::TimeMs ended_ms = 0;
    std::string reason;
};

struct EntryResult {
    std::string scenario;
    int exit_code = kAllSucceeded;
    std::int64_t attempted = 0;
    std::int64_t succeeded = 0;
    std::string log;
    std::string log_path;
    std::string error;
    std::vector<CallSummary> calls;
    std::vector<net::TimeMs> start_times_ms;
};

struct RunResult {
    std::vector<EntryResult> entries;
};

/// 100 * (entries with exit 0) / (entries), rounded half up; 0 when empty.
int success_rate(const RunResult& result);

/// Exit code a process should report for the whole run: the most severe
/// entry code, severity 0 < 1 < 97 < 99 < -1.
int worst_exit_code(const RunResult& result);

/// targets / rate-per-hour, in hours.
double campaign_duration_hours(std::int64_t targets, const Rate& rate);
/// Same, with the rate given in calls per hour.
double campaign_duration_hours(std::int64_t targets, double calls_per_hour);

/// {entries: [{scenario, exit_code, attempted, succeeded, log_path}], success_rate}
std::string to_json(const RunResult& result);

/// Value for a placeholder that depends on what the call has seen so far.
using ComputedBinding =
    std::function<std::string(const sip::SipMessage* last_received, const scenario::Bindings& bindings)>;

struct EngineOptions {
    /// Directory for per-entry log files; empty keeps logs in memory only.
    /// SXSM_LOG_DIR overrides it when set.
    std::filesystem::path log_dir;
    std::map<std::string, ComputedBinding> computed;
    /// Keep per-call summaries (scan classification needs them).
    bool keep_call_summaries = true;
};

/// Shoot-mode executor. Runs on the transport's loop; entries are executed
/// one after the other, calls of one entry overlap in flight.
class Engine {
public:
    Engine(net::Transport& transport, EngineOptions options = {});
    ~Engine();
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    /// Begins executing; `done` fires on the loop when every entry has ended.
    void start(ShootPlan plan, std::function<void(const RunResult&)> done = {});
    /// External stop command: the running entry ends with 97 and later
    /// entries are not started.
    void stop();

    bool finished() const;
    const RunResult& result() const;

private:
    class Impl;
    std::unique_ptr<Impl> impl_;
};

/// Runs `plan` to completion on the transport's loop.
RunResult execute(const ShootPlan& plan, net::Transport& transport, EngineOptions options = {});

using TransportFactory = std::function<std::unique_ptr<net::Transport>(const net::Address& local)>;

/// load_plan, bind the plan's local address, execute. Load and bind
/// failures yield a single entry with exit -1.
RunResult execute_file(const std::filesystem::path& plan_path, const TransportFactory& make_transport,
                       EngineOptions options = {});

}  // namespace sxsm::engine
