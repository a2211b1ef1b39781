#include "sxsm/engine/engine.hpp"

#include <cstdlib>
#include <deque>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sxsm::engine {

using net::TimeMs;
using scenario::Bindings;

std::string_view to_string(CallOutcome outcome) {
    switch (outcome) {
    case CallOutcome::Success: return "success";
    case CallOutcome::Aborted: return "aborted";
    case CallOutcome::Stopped: return "stopped";
    }
    return "?";
}

int success_rate(const RunResult& result) {
    if (result.entries.empty()) return 0;
    std::int64_t zeros = 0;
    for (const auto& e : result.entries) zeros += e.exit_code == kAllSucceeded;
    auto total = static_cast<std::int64_t>(result.entries.size());
    return static_cast<int>((200 * zeros + total) / (2 * total));
}

namespace {
int severity(int code) {
    switch (code) {
    case kAllSucceeded: return 0;
    case kCallFailed: return 1;
    case kStopped: return 2;
    case kNoCalls: return 3;
    default: return 4;
    }
}
}  // namespace

int worst_exit_code(const RunResult& result) {
    int worst = kAllSucceeded;
    for (const auto& e : result.entries)
        if (severity(e.exit_code) > severity(worst)) worst = e.exit_code;
    return worst;
}

double campaign_duration_hours(std::int64_t targets, const Rate& rate) {
    // rate is num/den calls per second
    return static_cast<double>(targets) * static_cast<double>(rate.den) / (3600.0 * static_cast<double>(rate.num));
}

double campaign_duration_hours(std::int64_t targets, double calls_per_hour) {
    if (calls_per_hour <= 0) throw std::invalid_argument("rate must be > 0");
    return static_cast<double>(targets) / calls_per_hour;
}

std::string to_json(const RunResult& result) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : result.entries) {
        nlohmann::json j{{"scenario", e.scenario},   {"exit_code", e.exit_code}, {"attempted", e.attempted},
                         {"succeeded", e.succeeded}, {"log_path", e.log_path}};
        if (!e.error.empty()) j["error"] = e.error;
        entries.push_back(std::move(j));
    }
    nlohmann::json doc{{"entries", entries}, {"success_rate", success_rate(result)}};
    return doc.dump(2);
}

namespace {

bool is_field(const std::string& id) {
    return id.size() > 5 && id.rfind("field", 0) == 0 && id.find_first_not_of("0123456789", 5) == std::string::npos;
}

std::string format_ts(TimeMs t) {
    std::ostringstream out;
    out << t / 1000 << '.' << std::setw(3) << std::setfill('0') << t % 1000;
    return out.str();
}

}  // namespace

class Engine::Impl {
public:
    struct Call {
        std::int64_t number = 0;
        std::string call_id;
        std::vector<std::string> owned_ids;
        Bindings bindings;
        net::Address peer;
        std::size_t pc = 0;
        int cseq = 0;
        int sends = 0;
        std::deque<sip::SipMessage> buffer;
        std::optional<sip::SipMessage> last;
        net::EventLoop::TimerId timer = 0;
        bool waiting = false;
        bool done = false;
        CallSummary summary;
    };

    Impl(net::Transport& transport, EngineOptions options) : transport_(transport), options_(std::move(options)) {
        if (const char* dir = std::getenv("SXSM_LOG_DIR"); dir && *dir) options_.log_dir = dir;
        transport_.on_receive([this](const net::Address& from, const std::string& bytes) { on_datagram(from, bytes); });
    }

    ~Impl() {
        *alive_ = false;
        transport_.on_receive({});
        cancel_entry_timers();
        for (auto& [_, call] : calls_)
            if (call->timer) loop().cancel(call->timer);
    }

    template <typename Fn>
    void post(Fn fn) {
        loop().post([alive = alive_, fn = std::move(fn)] {
            if (*alive) fn();
        });
    }

    net::EventLoop& loop() { return transport_.loop(); }

    void start(ShootPlan plan, std::function<void(const RunResult&)> done) {
        plan_ = std::move(plan);
        done_ = std::move(done);
        result_ = {};
        entry_index_ = 0;
        running_ = true;
        try {
            plan_.validate();
        } catch (const std::exception& e) {
            EntryResult r;
            r.scenario = plan_.entries.empty() ? "plan" : plan_.entries.front().bundle.scenario.name;
            r.exit_code = kFatal;
            r.error = e.what();
            result_.entries.push_back(std::move(r));
            finish_run();
            return;
        }
        post([this] { start_entry(); });
    }

    void stop() {
        if (!running_) return;
        stop_requested_ = true;
        if (entry_active_) end_entry(EndReason::Stop);
    }

    bool finished() const { return !running_; }
    const RunResult& result() const { return result_; }

private:
    enum class EndReason { Completed, Stop, Timeout };

    void start_entry() {
        if (entry_index_ >= plan_.entries.size()) {
            finish_run();
            return;
        }
        const auto& entry = plan_.entries[entry_index_];
        current_ = EntryResult{};
        current_.scenario = entry.bundle.scenario.name.empty() ? entry.scenario_ref : entry.bundle.scenario.name;
        if (stop_requested_) {
            current_.exit_code = kStopped;
            close_entry();
            return;
        }
        log_.str({});
        calls_.clear();
        active_.clear();
        retired_.clear();
        started_ = finished_ = 0;
        entry_start_ = loop().now();
        server_ = entry.bundle.scenario.is_server();
        callers_ = plan_.callers;
        targets_ = plan_.targets;

        if (auto bad = unknown_placeholder(entry); !bad.empty()) {
            current_.exit_code = kFatal;
            current_.error = "unbound placeholder [" + bad + "]";
            close_entry();
            return;
        }
        entry_active_ = true;
        if (!server_) {
            if (targets_.empty()) {
                end_entry(EndReason::Completed);
                return;
            }
            for (std::int64_t i = 0; i < entry.max_calls; ++i) {
                auto id = loop().at(entry_start_ + entry.rate.start_offset_ms(i), [this, i] {
                    start_timers_.erase(i);
                    start_client_call(i);
                });
                start_timers_[i] = id;
            }
        }
        global_timer_ = loop().at(entry_start_ + plan_.global_timeout_ms, [this] {
            global_timer_ = 0;
            end_entry(EndReason::Timeout);
        });
    }

    std::string unknown_placeholder(const ShootEntry& entry) const {
        for (const auto& step : entry.bundle.scenario.steps) {
            const auto* send = std::get_if<scenario::Send>(&step);
            if (!send) continue;
            const auto& text = send->text.empty() ? entry.bundle.get_template(send->template_name).text : send->text;
            for (const auto& id : scenario::placeholders(text)) {
                if (is_field(id) || id.rfind("last_", 0) == 0 || scenario::builtin_identifiers().contains(id) ||
                    options_.computed.contains(id))
                    continue;
                return id;
            }
        }
        return {};
    }

    Bindings base_bindings(Call& call) const {
        Bindings b;
        auto local = transport_.local();
        b["local_ip"] = local.ip;
        b["local_port"] = std::to_string(local.port);
        b["remote_ip"] = call.peer.ip;
        b["remote_port"] = std::to_string(call.peer.port);
        b["call_id"] = call.call_id;
        b["call_number"] = std::to_string(call.number);
        b["domain"] = plan_.domain;
        return b;
    }

    std::string make_call_id(std::int64_t number) const {
        return plan_.call_id_prefix + std::to_string(transport_.local().port) + "-" + std::to_string(entry_index_) +
               "-" + std::to_string(number) + "@" + transport_.local().ip;
    }

    Call& new_call(std::int64_t number) {
        auto call = std::make_unique<Call>();
        call->number = number;
        call->call_id = make_call_id(number);
        call->summary.call_id = call->call_id;
        call->summary.call_number = number;
        call->summary.started_ms = loop().now();
        auto& ref = *call;
        calls_[number] = std::move(call);
        active_[ref.call_id] = &ref;
        ref.owned_ids.push_back(ref.call_id);
        ++started_;
        current_.start_times_ms.push_back(ref.summary.started_ms);
        return ref;
    }

    void start_client_call(std::int64_t number) {
        if (!entry_active_) return;
        auto& call = new_call(number);
        const auto& target = targets_.next_row();
        Bindings row_values;
        row_values["target_user"] = target[0];
        row_values["target_host"] = target.size() > 1 ? target[1] : plan_.domain;
        row_values["target_port"] = target.size() > 2 ? target[2] : std::to_string(plan_.remote.port);
        if (plan_.route == Route::Direct) {
            try {
                call.peer = net::Address::parse(row_values["target_host"] + ":" + row_values["target_port"]);
            } catch (const std::exception& e) {
                call.peer = plan_.remote;
                call.summary.target = row_values["target_user"] + "@" + row_values["target_host"];
                abort_call(call, std::string("bad direct target: ") + e.what());
                return;
            }
        } else {
            call.peer = plan_.remote;
        }
        call.summary.target = row_values["target_user"] + "@" + row_values["target_host"];
        call.bindings = base_bindings(call);
        call.bindings.merge(row_values);
        if (!callers_.empty()) {
            const auto& row = callers_.next_row();
            for (const auto& [k, v] : scenario::row_bindings(row)) call.bindings[k] = v;
            if (row.size() >= 3) call.bindings["caller_uri"] = "sip:" + row[1] + "@" + row[2];
        }
        advance(call);
    }

    void start_server_call(const net::Address& from, sip::SipMessage msg) {
        auto& call = new_call(started_);
        call.peer = from;
        call.bindings = base_bindings(call);
        auto incoming = msg.call_id();
        if (incoming != call.call_id) {
            active_[incoming] = &call;
            call.owned_ids.push_back(incoming);
        }
        call.bindings["call_id"] = incoming;
        call.summary.call_id = incoming;
        if (auto to = msg.to_uri()) call.summary.target = to->identity();
        log_line("RECV", msg, incoming);
        call.buffer.push_back(std::move(msg));
        advance(call);
    }

    void on_datagram(const net::Address& from, const std::string& bytes) {
        if (!entry_active_) return;
        sip::SipMessage msg;
        try {
            msg = sip::parse(bytes);
        } catch (const sip::ParseError& e) {
            log_ << format_ts(loop().now()) << " RECV-ERROR " << e.what() << " from " << from.str() << '\n';
            return;
        }
        auto id = msg.call_id();
        if (auto it = active_.find(id); it != active_.end()) {
            auto& call = *it->second;
            log_line("RECV", msg, id);
            if (msg.is_response()) call.summary.responses.push_back(msg.status());
            call.buffer.push_back(std::move(msg));
            if (call.waiting && try_match(call)) advance(call);
            return;
        }
        if (server_ && !retired_.contains(id) && msg.is_request() && msg.method() != "ACK" &&
            started_ < plan_.entries[entry_index_].max_calls) {
            start_server_call(from, std::move(msg));
            return;
        }
        log_line("RECV-UNMATCHED", msg, id);
    }

    bool try_match(Call& call) {
        const auto& sc = plan_.entries[entry_index_].bundle.scenario;
        auto [first, last] = sc.recv_group(call.pc);
        for (auto it = call.buffer.begin(); it != call.buffer.end(); ++it) {
            for (auto k = first; k <= last; ++k) {
                const auto& recv = std::get<scenario::Recv>(sc.steps[k]);
                if (!recv.matcher.matches(*it)) continue;
                call.last = std::move(*it);
                call.buffer.erase(it);
                if (call.waiting) {
                    loop().cancel(call.timer);
                    call.timer = 0;
                    call.waiting = false;
                }
                call.pc = recv.jump ? sc.label_index(*recv.jump) : last + 1;
                return true;
            }
        }
        return false;
    }

    void advance(Call& call) {
        const auto& entry = plan_.entries[entry_index_];
        const auto& sc = entry.bundle.scenario;
        while (!call.done) {
            if (call.pc >= sc.steps.size()) {
                finish_call(call, CallOutcome::Success, {});
                return;
            }
            const auto& step = sc.steps[call.pc];
            if (std::holds_alternative<scenario::Label>(step)) {
                ++call.pc;
            } else if (const auto* pause = std::get_if<scenario::Pause>(&step)) {
                ++call.pc;
                call.timer = loop().after(pause->ms, [this, &call] {
                    call.timer = 0;
                    advance(call);
                });
                return;
            } else if (const auto* send = std::get_if<scenario::Send>(&step)) {
                if (!do_send(call, entry, *send)) return;
                ++call.pc;
            } else if (std::holds_alternative<scenario::Recv>(step)) {
                if (try_match(call)) continue;
                auto [first, last] = sc.recv_group(call.pc);
                TimeMs timeout = 0;
                for (auto k = first; k <= last; ++k)
                    if (auto t = std::get<scenario::Recv>(sc.steps[k]).timeout_ms)
                        timeout = timeout == 0 ? *t : std::min<TimeMs>(timeout, *t);
                if (timeout == 0) timeout = plan_.recv_timeout_ms;
                call.waiting = true;
                call.timer = loop().after(timeout, [this, &call] {
                    call.timer = 0;
                    call.waiting = false;
                    abort_call(call, "recv timeout");
                });
                return;
            } else if (const auto* stop = std::get_if<scenario::Stop>(&step)) {
                if (stop->intent == scenario::ExitIntent::Success)
                    finish_call(call, CallOutcome::Success, {});
                else
                    abort_call(call, "stop intent aborted");
                return;
            }
        }
    }

    bool do_send(Call& call, const ShootEntry& entry, const scenario::Send& send) {
        try {
            const auto& text = send.text.empty() ? entry.bundle.get_template(send.template_name).text : send.text;
            auto method = scenario::template_method(text);
            if (!method.empty() && method != "ACK" && method != "CANCEL") ++call.cseq;
            auto bindings = call.bindings;
            bindings["cseq"] = std::to_string(call.cseq);
            bindings["branch"] = "z9hG4bK-" + call.call_id + "-" + std::to_string(++call.sends);
            for (const auto& id : scenario::placeholders(text)) {
                if (id.rfind("last_", 0) == 0) {
                    std::string value;
                    if (call.last)
                        if (auto h = call.last->header(std::string_view(id).substr(5))) value = std::string(*h);
                    bindings[id] = value;
                } else if (auto it = options_.computed.find(id); it != options_.computed.end()) {
                    bindings[id] = it->second(call.last ? &*call.last : nullptr, bindings);
                }
            }
            auto msg = scenario::expand(scenario::MessageTemplate{"", send.template_name, text}, bindings);
            auto id = msg.call_id();
            if (!id.empty() && !active_.contains(id)) {
                active_[id] = &call;
                call.owned_ids.push_back(id);
            }
            log_line("SEND", msg, id);
            transport_.send(call.peer, sip::serialize(msg));
            return true;
        } catch (const std::exception& e) {
            abort_call(call, e.what());
            return false;
        }
    }

    void abort_call(Call& call, const std::string& reason) { finish_call(call, CallOutcome::Aborted, reason); }

    void finish_call(Call& call, CallOutcome outcome, const std::string& reason) {
        if (call.done) return;
        call.done = true;
        if (call.timer) loop().cancel(call.timer);
        call.timer = 0;
        call.waiting = false;
        for (const auto& id : call.owned_ids) {
            active_.erase(id);
            retired_.insert(id);
        }
        call.summary.outcome = outcome;
        call.summary.reason = reason;
        call.summary.ended_ms = loop().now();
        if (outcome == CallOutcome::Success) ++current_.succeeded;
        if (!reason.empty())
            log_ << format_ts(loop().now()) << " ABORT " << reason << ' ' << call.call_id << '\n';
        ++finished_;
        if (entry_active_ && finished_ == plan_.entries[entry_index_].max_calls) {
            // let the remaining datagrams of this call drain before moving on
            post([this, index = entry_index_] {
                if (entry_active_ && entry_index_ == index) end_entry(EndReason::Completed);
            });
        }
    }

    void cancel_entry_timers() {
        for (const auto& [_, id] : start_timers_) loop().cancel(id);
        start_timers_.clear();
        if (global_timer_) loop().cancel(global_timer_);
        global_timer_ = 0;
    }

    void end_entry(EndReason reason) {
        if (!entry_active_) return;
        entry_active_ = false;
        cancel_entry_timers();
        bool any_aborted = false;
        for (auto& [_, call] : calls_) {
            if (!call->done) finish_call(*call, CallOutcome::Stopped, reason == EndReason::Stop ? "stopped" : "global timeout");
            any_aborted |= call->summary.outcome == CallOutcome::Aborted;
        }
        current_.attempted = started_;
        if (reason == EndReason::Stop)
            current_.exit_code = kStopped;
        else if (reason == EndReason::Timeout)
            current_.exit_code = started_ == 0 ? kNoCalls : kStopped;
        else if (started_ == 0)
            current_.exit_code = kNoCalls;
        else
            current_.exit_code = any_aborted ? kCallFailed : kAllSucceeded;
        if (options_.keep_call_summaries)
            for (auto& [_, call] : calls_) current_.calls.push_back(call->summary);
        current_.log = log_.str();
        close_entry();
    }

    void close_entry() {
        if (!options_.log_dir.empty()) {
            try {
                auto path = options_.log_dir / (current_.scenario + "-" + std::to_string(transport_.local().port) + "-" +
                                                std::to_string(entry_index_) + ".log");
                scenario::write_file(path, current_.log);
                current_.log_path = path.string();
            } catch (const std::exception& e) {
                current_.error += std::string(current_.error.empty() ? "" : "; ") + e.what();
            }
        }
        result_.entries.push_back(std::move(current_));
        current_ = {};
        ++entry_index_;
        post([this] { start_entry(); });
    }

    void finish_run() {
        running_ = false;
        entry_active_ = false;
        if (done_) done_(result_);
    }

    void log_line(const char* direction, const sip::SipMessage& msg, const std::string& call_id) {
        log_ << format_ts(loop().now()) << ' ' << direction << ' ' << msg.start_line() << ' ' << call_id << '\n';
    }

    net::Transport& transport_;
    EngineOptions options_;
    ShootPlan plan_;
    std::function<void(const RunResult&)> done_;
    RunResult result_;
    EntryResult current_;
    std::size_t entry_index_ = 0;
    bool running_ = false;
    bool entry_active_ = false;
    bool stop_requested_ = false;
    bool server_ = false;
    TimeMs entry_start_ = 0;
    std::int64_t started_ = 0;
    std::int64_t finished_ = 0;
    scenario::InjectionTable callers_;
    scenario::InjectionTable targets_;
    std::map<std::int64_t, std::unique_ptr<Call>> calls_;
    std::map<std::string, Call*> active_;
    std::set<std::string> retired_;
    std::map<std::int64_t, net::EventLoop::TimerId> start_timers_;
    net::EventLoop::TimerId global_timer_ = 0;
    std::ostringstream log_;
    std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

Engine::Engine(net::Transport& transport, EngineOptions options)
    : impl_(std::make_unique<Impl>(transport, std::move(options))) {}

Engine::~Engine() = default;

void Engine::start(ShootPlan plan, std::function<void(const RunResult&)> done) {
    impl_->start(std::move(plan), std::move(done));
}

void Engine::stop() { impl_->stop(); }

bool Engine::finished() const { return impl_->finished(); }

const RunResult& Engine::result() const { return impl_->result(); }

RunResult execute(const ShootPlan& plan, net::Transport& transport, EngineOptions options) {
    Engine engine(transport, std::move(options));
    engine.start(plan);
    transport.loop().run_while([&] { return !engine.finished(); });
    return engine.result();
}

RunResult execute_file(const std::filesystem::path& plan_path, const TransportFactory& make_transport,
                       EngineOptions options) {
    ShootPlan plan;
    std::unique_ptr<net::Transport> transport;
    try {
        plan = load_plan(plan_path);
        transport = make_transport(plan.local);
    } catch (const std::exception& e) {
        RunResult result;
        EntryResult entry;
        entry.scenario = plan_path.stem().string();
        entry.exit_code = kFatal;
        entry.error = e.what();
        result.entries.push_back(std::move(entry));
        return result;
    }
    return execute(plan, *transport, std::move(options));
}

}  // namespace sxsm::engine
