#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "sxsm/engine/engine.hpp"

using namespace sxsm;
using namespace sxsm::engine;
using net::Address;

namespace {

const char* kInvite =
    "INVITE sip:[target_user]@[target_host] SIP/2.0\n"
    "Via: SIP/2.0/UDP [local_ip]:[local_port];branch=[branch]\n"
    "From: <sip:[field1]@[field2]>;tag=[call_number]\n"
    "To: <sip:[target_user]@[target_host]>\n"
    "Call-ID: [call_id]\n"
    "CSeq: [cseq] INVITE\n"
    "Content-Length: [len]\n";
const char* kAck =
    "ACK sip:[target_user]@[target_host] SIP/2.0\n"
    "Via: SIP/2.0/UDP [local_ip]:[local_port];branch=[branch]\n"
    "Call-ID: [call_id]\n"
    "CSeq: [cseq] ACK\n";
const char* kBye =
    "BYE sip:[target_user]@[target_host] SIP/2.0\n"
    "Via: SIP/2.0/UDP [local_ip]:[local_port];branch=[branch]\n"
    "Call-ID: [call_id]\n"
    "CSeq: [cseq] BYE\n";

scenario::Bundle uac_bundle() {
    scenario::Bundle b;
    b.scenario = scenario::load_scenario(R"(<scenario name="uac" set="t">
      <send template="invite"/>
      <recv status="100"/>
      <recv status="180"/>
      <recv status="200"/>
      <send template="ack"/>
      <send template="bye"/>
      <recv status="200"/>
    </scenario>)");
    b.templates["invite"] = {"t", "invite", kInvite};
    b.templates["ack"] = {"t", "ack", kAck};
    b.templates["bye"] = {"t", "bye", kBye};
    return b;
}

/// Answers INVITEs with 100/180/then whatever `final_for(n)` says, BYE with
/// 200. `n` counts INVITEs from 0.
class ScriptedUas {
public:
    ScriptedUas(net::LoopbackNetwork& net, Address addr, std::function<int(int)> final_for)
        : transport_(net.bind(addr)), final_for_(std::move(final_for)) {
        transport_->on_receive([this](const Address& from, const std::string& bytes) { handle(from, bytes); });
    }

    int invites = 0;
    int byes = 0;
    std::vector<std::string> cseqs;

private:
    void reply(const Address& to, const sip::SipMessage& req, int status, const char* reason) {
        auto r = sip::SipMessage::response(status, reason);
        for (const char* h : {"Via", "From", "To", "Call-ID", "CSeq"})
            if (auto v = req.header(h)) r.add_header(h, std::string(*v));
        transport_->send(to, sip::serialize(r));
    }

    void handle(const Address& from, const std::string& bytes) {
        auto req = sip::parse(bytes);
        cseqs.push_back(std::string(*req.header("CSeq")));
        if (req.method() == "INVITE") {
            int status = final_for_(invites++);
            reply(from, req, 100, "Trying");
            if (status == 200) reply(from, req, 180, "Ringing");
            if (status != 0) reply(from, req, status, status == 200 ? "OK" : "Nope");
        } else if (req.method() == "BYE") {
            ++byes;
            reply(from, req, 200, "OK");
        }
    }

    std::unique_ptr<net::Transport> transport_;
    std::function<int(int)> final_for_;
};

ShootPlan basic_plan(int calls, Rate rate) {
    ShootPlan p;
    p.remote = {"127.0.0.1", 5060};
    p.local = {"127.0.0.1", 5061};
    p.callers = scenario::InjectionTable({{"Alice", "alice", "example.com"}});
    p.targets = scenario::InjectionTable({{"5550001"}});
    p.entries.push_back(ShootEntry{uac_bundle(), rate, calls, "uac"});
    return p;
}

}  // namespace

TEST(Rate, ParseAndOffsets) {
    EXPECT_EQ(Rate::parse("10"), (Rate{10, 1}));
    EXPECT_EQ(Rate::parse("10/20"), (Rate{1, 2}));
    EXPECT_THROW(Rate::parse("0"), PlanInvalid);
    EXPECT_THROW(Rate::parse("x"), PlanInvalid);
    EXPECT_EQ(Rate::per_second(10).start_offset_ms(7), 700);
    EXPECT_EQ((Rate{3, 1}).start_offset_ms(1), 333);
    EXPECT_EQ((Rate{3, 1}).start_offset_ms(2), 667);
}

TEST(SuccessRate, Examples) {
    RunResult all_zero;
    all_zero.entries.resize(3);
    EXPECT_EQ(success_rate(all_zero), 100);
    RunResult mixed;
    mixed.entries.resize(2);
    mixed.entries[1].exit_code = kCallFailed;
    EXPECT_EQ(success_rate(mixed), 50);
    EXPECT_EQ(success_rate(RunResult{}), 0);
    RunResult thirds;
    thirds.entries.resize(3);
    thirds.entries[0].exit_code = kNoCalls;
    EXPECT_EQ(success_rate(thirds), 67);
    RunResult eighth;
    eighth.entries.resize(8);
    for (int i = 1; i < 8; ++i) eighth.entries[i].exit_code = kFatal;
    // 12.5 rounds half up
    EXPECT_EQ(success_rate(eighth), 13);
}

TEST(SuccessRate, MatchesHalfUpOracle) {
    std::mt19937 rng(5);
    const int codes[] = {0, 1, 97, 99, -1};
    for (int trial = 0; trial < 200; ++trial) {
        RunResult r;
        r.entries.resize(1 + rng() % 40);
        int zeros = 0;
        for (auto& e : r.entries) {
            e.exit_code = codes[rng() % 5];
            zeros += e.exit_code == 0;
        }
        int expected = static_cast<int>(std::floor(100.0 * zeros / r.entries.size() + 0.5 + 1e-9));
        EXPECT_EQ(success_rate(r), expected);
    }
}

TEST(WorstExitCode, SeverityOrder) {
    RunResult r;
    r.entries.resize(3);
    EXPECT_EQ(worst_exit_code(r), 0);
    r.entries[0].exit_code = kStopped;
    r.entries[1].exit_code = kCallFailed;
    EXPECT_EQ(worst_exit_code(r), kStopped);
    r.entries[2].exit_code = kNoCalls;
    EXPECT_EQ(worst_exit_code(r), kNoCalls);
    r.entries[1].exit_code = kFatal;
    EXPECT_EQ(worst_exit_code(r), kFatal);
}

TEST(CampaignDuration, Examples) {
    EXPECT_DOUBLE_EQ(campaign_duration_hours(1000, 5.0), 200.0);
    EXPECT_NEAR(campaign_duration_hours(1000, 5.0) / 24.0, 8.33, 0.01);
    EXPECT_DOUBLE_EQ(campaign_duration_hours(0, 3.0), 0.0);
    EXPECT_DOUBLE_EQ(campaign_duration_hours(100, 10.0), 10.0);
    EXPECT_DOUBLE_EQ(campaign_duration_hours(1000, Rate::per_hour(5)), 200.0);
    EXPECT_THROW(campaign_duration_hours(1, 0.0), std::invalid_argument);
}

TEST(Execute, HundredCallsAtTenPerSecond) {
    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    ScriptedUas uas(net, {"127.0.0.1", 5060}, [](int) { return 200; });
    auto transport = net.bind({"127.0.0.1", 5061});
    auto result = execute(basic_plan(100, Rate::per_second(10)), *transport);
    ASSERT_EQ(result.entries.size(), 1u);
    const auto& e = result.entries[0];
    EXPECT_EQ(e.exit_code, kAllSucceeded);
    EXPECT_EQ(e.attempted, 100);
    EXPECT_EQ(e.succeeded, 100);
    ASSERT_EQ(e.start_times_ms.size(), 100u);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(e.start_times_ms[i] - e.start_times_ms[0], i * 100);
    EXPECT_EQ(uas.byes, 100);
    EXPECT_EQ(success_rate(result), 100);
}

TEST(Execute, OneRejectedCallYieldsExitOne) {
    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    ScriptedUas uas(net, {"127.0.0.1", 5060}, [](int n) { return n == 5 ? 404 : 200; });
    auto transport = net.bind({"127.0.0.1", 5061});
    auto result = execute(basic_plan(10, Rate::per_second(10)), *transport);
    EXPECT_EQ(result.entries[0].exit_code, kCallFailed);
    EXPECT_EQ(result.entries[0].attempted, 10);
    EXPECT_EQ(result.entries[0].succeeded, 9);
}

TEST(Execute, NoTargetsYieldsNinetyNine) {
    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    auto transport = net.bind({"127.0.0.1", 5061});
    auto plan = basic_plan(5, Rate::per_second(1));
    plan.targets = {};
    auto result = execute(plan, *transport);
    EXPECT_EQ(result.entries[0].exit_code, kNoCalls);
    EXPECT_EQ(result.entries[0].attempted, 0);
}

TEST(Execute, MissingCsvIsFatal) {
    auto dir = std::filesystem::temp_directory_path() / "sxsm_plan_missing_csv";
    std::filesystem::remove_all(dir);
    auto plan = basic_plan(1, Rate::per_second(1));
    auto path = save_plan(plan, dir);
    std::filesystem::remove(dir / "targets.csv");
    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    auto result = execute_file(path, [&](const Address& a) { return net.bind(a); });
    ASSERT_EQ(result.entries.size(), 1u);
    EXPECT_EQ(result.entries[0].exit_code, kFatal);
    EXPECT_EQ(result.entries[0].attempted, 0);
    std::filesystem::remove_all(dir);
}

TEST(Execute, PlanFileRoundTrip) {
    auto dir = std::filesystem::temp_directory_path() / "sxsm_plan_roundtrip";
    std::filesystem::remove_all(dir);
    auto plan = basic_plan(3, Rate{5, 2});
    plan.route = Route::Direct;
    plan.targets = scenario::InjectionTable({{"bob", "127.0.0.1", "5060"}});
    auto path = save_plan(plan, dir);
    auto back = load_plan(path);
    EXPECT_EQ(back.entries.size(), 1u);
    EXPECT_EQ(back.entries[0].rate, (Rate{5, 2}));
    EXPECT_EQ(back.entries[0].max_calls, 3);
    EXPECT_EQ(back.entries[0].bundle.scenario, plan.entries[0].bundle.scenario);
    EXPECT_EQ(back.targets.rows(), plan.targets.rows());
    EXPECT_EQ(back.route, Route::Direct);

    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    ScriptedUas uas(net, {"127.0.0.1", 5060}, [](int) { return 200; });
    auto result = execute_file(path, [&](const Address& a) { return net.bind(a); });
    EXPECT_EQ(result.entries[0].exit_code, kAllSucceeded);
    EXPECT_EQ(result.entries[0].succeeded, 3);
    std::filesystem::remove_all(dir);
}

TEST(Execute, TimeoutWithoutJumpAborts) {
    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    ScriptedUas uas(net, {"127.0.0.1", 5060}, [](int) { return 0; });
    auto transport = net.bind({"127.0.0.1", 5061});
    auto result = execute(basic_plan(2, Rate::per_second(1)), *transport);
    EXPECT_EQ(result.entries[0].exit_code, kCallFailed);
    EXPECT_EQ(result.entries[0].succeeded, 0);
    EXPECT_EQ(result.entries[0].calls[0].reason, "recv timeout");
    // the wait for 180 starts when 100 Trying arrives, 2 ms into the call
    EXPECT_EQ(result.entries[0].calls[0].ended_ms - result.entries[0].calls[0].started_ms, 4002);
}

TEST(Execute, GlobalTimeoutAndStopYieldNinetySeven) {
    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    ScriptedUas uas(net, {"127.0.0.1", 5060}, [](int) { return 200; });
    auto transport = net.bind({"127.0.0.1", 5061});
    auto plan = basic_plan(100, Rate::per_second(1));
    plan.global_timeout_ms = 10'000;
    auto timed_out = execute(plan, *transport);
    EXPECT_EQ(timed_out.entries[0].exit_code, kStopped);
    // starts at 0 s .. 10 s inclusive
    EXPECT_EQ(timed_out.entries[0].attempted, 11);

    plan.global_timeout_ms = 300'000;
    plan.entries.push_back(plan.entries[0]);
    Engine engine(*transport);
    engine.start(plan);
    loop.after(5'500, [&] { engine.stop(); });
    loop.run_while([&] { return !engine.finished(); });
    ASSERT_EQ(engine.result().entries.size(), 2u);
    EXPECT_EQ(engine.result().entries[0].exit_code, kStopped);
    EXPECT_EQ(engine.result().entries[0].attempted, 6);
    EXPECT_EQ(engine.result().entries[1].exit_code, kStopped);
    EXPECT_EQ(engine.result().entries[1].attempted, 0);
}

TEST(Execute, UnknownPlaceholderIsFatal) {
    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    auto transport = net.bind({"127.0.0.1", 5061});
    auto plan = basic_plan(1, Rate::per_second(1));
    plan.entries[0].bundle.templates["bye"].text += "X-Test: [mystery]\n";
    auto result = execute(plan, *transport);
    EXPECT_EQ(result.entries[0].exit_code, kFatal);
}

TEST(Execute, FieldBeyondCallerArityIsFatal) {
    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    auto transport = net.bind({"127.0.0.1", 5061});
    auto plan = basic_plan(1, Rate::per_second(1));
    plan.entries[0].bundle.templates["bye"].text += "X-Test: [field9]\n";
    EXPECT_EQ(execute(plan, *transport).entries[0].exit_code, kFatal);
}

TEST(Execute, CseqIncrementsExceptAckAndBuffersEarlyResponses) {
    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    ScriptedUas uas(net, {"127.0.0.1", 5060}, [](int) { return 200; });
    auto transport = net.bind({"127.0.0.1", 5061});
    auto result = execute(basic_plan(1, Rate::per_second(1)), *transport);
    EXPECT_EQ(result.entries[0].exit_code, kAllSucceeded);
    EXPECT_EQ(uas.cseqs, (std::vector<std::string>{"1 INVITE", "1 ACK", "2 BYE"}));
    EXPECT_EQ(result.entries[0].calls[0].responses, (std::vector<int>{100, 180, 200, 200}));
}

TEST(Execute, RecvGroupBranches) {
    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    ScriptedUas uas(net, {"127.0.0.1", 5060}, [](int n) { return n % 2 ? 404 : 200; });
    auto transport = net.bind({"127.0.0.1", 5061});
    auto plan = basic_plan(4, Rate::per_second(10));
    auto& b = plan.entries[0].bundle;
    b.scenario = scenario::load_scenario(R"(<scenario name="branchy" set="t">
      <send template="invite"/>
      <recv status="404" jump="gone"/>
      <recv status="200"/>
      <send template="ack"/>
      <send template="bye"/>
      <recv status="200"/>
      <stop intent="success"/>
      <label name="gone"/>
      <stop intent="aborted"/>
    </scenario>)");
    auto result = execute(plan, *transport);
    EXPECT_EQ(result.entries[0].exit_code, kCallFailed);
    EXPECT_EQ(result.entries[0].succeeded, 2);
    EXPECT_EQ(uas.byes, 2);
}

TEST(Execute, ServerEntryAnswersClientEntry) {
    net::EventLoop loop;
    net::LoopbackNetwork net(loop);
    auto uas_transport = net.bind({"127.0.0.1", 5060});
    auto uac_transport = net.bind({"127.0.0.1", 5061});

    ShootPlan server;
    server.local = uas_transport->local();
    server.targets = scenario::InjectionTable({{"unused"}});
    scenario::Bundle sb;
    sb.scenario = scenario::load_scenario(R"(<scenario name="uas" set="t">
      <recv method="INVITE"/>
      <send>SIP/2.0 180 Ringing
Via: [last_Via]
From: [last_From]
To: [last_To]
Call-ID: [last_Call-ID]
CSeq: [last_CSeq]
</send>
      <send>SIP/2.0 200 OK
Via: [last_Via]
From: [last_From]
To: [last_To]
Call-ID: [last_Call-ID]
CSeq: [last_CSeq]
</send>
      <recv method="ACK"/>
      <recv method="BYE"/>
      <send>SIP/2.0 200 OK
Via: [last_Via]
Call-ID: [last_Call-ID]
CSeq: [last_CSeq]
</send>
    </scenario>)");
    server.entries.push_back(ShootEntry{sb, Rate::per_second(1), 5, "uas"});

    auto client = basic_plan(5, Rate::per_second(10));
    client.entries[0].bundle.scenario = scenario::load_scenario(R"(<scenario name="uac" set="t">
      <send template="invite"/>
      <recv status="180"/>
      <recv status="200"/>
      <send template="ack"/>
      <send template="bye"/>
      <recv status="200"/>
    </scenario>)");

    Engine uas(*uas_transport), uac(*uac_transport);
    uas.start(server);
    uac.start(client);
    loop.run_while([&] { return !uas.finished() || !uac.finished(); });
    EXPECT_EQ(uas.result().entries[0].exit_code, kAllSucceeded);
    EXPECT_EQ(uas.result().entries[0].attempted, 5);
    EXPECT_EQ(uac.result().entries[0].exit_code, kAllSucceeded);
    EXPECT_EQ(uac.result().entries[0].succeeded, 5);
}

TEST(Execute, DeterministicOnLoopback) {
    auto run = [] {
        net::EventLoop loop;
        net::LoopbackNetwork net(loop);
        ScriptedUas uas(net, {"127.0.0.1", 5060}, [](int n) { return n % 3 ? 200 : 480; });
        auto transport = net.bind({"127.0.0.1", 5061});
        return execute(basic_plan(30, Rate{7, 3}), *transport);
    };
    auto a = run(), b = run();
    EXPECT_EQ(to_json(a), to_json(b));
    EXPECT_EQ(a.entries[0].log, b.entries[0].log);
}

TEST(Execute, RateDisciplineOverRandomRates) {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        Rate rate{1 + static_cast<std::int64_t>(rng() % 20), 1 + static_cast<std::int64_t>(rng() % 5)};
        net::EventLoop loop;
        net::LoopbackNetwork net(loop);
        ScriptedUas uas(net, {"127.0.0.1", 5060}, [](int) { return 200; });
        auto transport = net.bind({"127.0.0.1", 5061});
        auto result = execute(basic_plan(40, rate), *transport);
        const auto& starts = result.entries[0].start_times_ms;
        ASSERT_EQ(starts.size(), 40u);
        for (std::size_t i = 0; i < starts.size(); ++i) {
            double ideal = 1000.0 * i * rate.den / rate.num;
            EXPECT_LE(std::abs(starts[i] - starts[0] - ideal), 10.0);
        }
        const net::TimeMs w = 1000;
        auto bound = static_cast<std::size_t>(std::ceil(w / 1000.0 * rate.per_second_value())) + 1;
        for (std::size_t i = 0; i < starts.size(); ++i) {
            std::size_t in_window = 0;
            for (std::size_t j = i; j < starts.size() && starts[j] < starts[i] + w; ++j) ++in_window;
            EXPECT_LE(in_window, bound);
        }
    }
}

TEST(ToJson, Shape) {
    RunResult r;
    r.entries.push_back(EntryResult{"s", 0, 3, 3, "", "/tmp/x.log", "", {}, {}});
    auto json = to_json(r);
    EXPECT_NE(json.find("\"success_rate\": 100"), std::string::npos);
    EXPECT_NE(json.find("\"log_path\": \"/tmp/x.log\""), std::string::npos);
}
