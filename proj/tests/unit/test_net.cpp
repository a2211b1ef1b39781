#include <gtest/gtest.h>

#include "sxsm/net/transport.hpp"

using namespace sxsm::net;

TEST(EventLoop, OrdersByTimeThenSchedulingOrder) {
    EventLoop loop;
    std::vector<int> seen;
    loop.at(20, [&] { seen.push_back(3); });
    loop.at(10, [&] { seen.push_back(1); });
    loop.at(10, [&] { seen.push_back(2); });
    loop.run();
    EXPECT_EQ(seen, (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(loop.now(), 20);
}

TEST(EventLoop, CancelAndRunUntil) {
    EventLoop loop;
    int fired = 0;
    auto id = loop.after(5, [&] { ++fired; });
    loop.after(50, [&] { ++fired; });
    loop.cancel(id);
    loop.cancel(id);
    loop.run_until(30);
    EXPECT_EQ(fired, 0);
    EXPECT_EQ(loop.now(), 30);
    loop.run();
    EXPECT_EQ(fired, 1);
}

TEST(EventLoop, StopHaltsProcessing) {
    EventLoop loop;
    int fired = 0;
    loop.after(1, [&] {
        ++fired;
        loop.stop();
    });
    loop.after(2, [&] { ++fired; });
    loop.run();
    EXPECT_EQ(fired, 1);
    EXPECT_EQ(loop.pending_timers(), 1u);
}

TEST(EventLoop, RealtimeClockAdvances) {
    EventLoop loop(ClockMode::Realtime);
    TimeMs fired_at = -1;
    loop.after(30, [&] { fired_at = loop.now(); });
    loop.run();
    EXPECT_GE(fired_at, 30);
    EXPECT_LT(fired_at, 200);
}

TEST(Address, Parse) {
    auto a = Address::parse("10.0.0.1:5060");
    EXPECT_EQ(a.ip, "10.0.0.1");
    EXPECT_EQ(a.port, 5060);
    EXPECT_EQ(a.str(), "10.0.0.1:5060");
    EXPECT_THROW(Address::parse("10.0.0.1"), std::invalid_argument);
    EXPECT_THROW(Address::parse("10.0.0.1:0"), std::invalid_argument);
}

TEST(Loopback, DeliversFifoWithLatency) {
    EventLoop loop;
    LoopbackNetwork net(loop, 2);
    auto a = net.bind({"127.0.0.1", 1000});
    auto b = net.bind({"127.0.0.1", 2000});
    std::vector<std::pair<TimeMs, std::string>> got;
    b->on_receive([&](const Address& from, const std::string& bytes) {
        EXPECT_EQ(from.port, 1000);
        got.emplace_back(loop.now(), bytes);
    });
    a->send(b->local(), "one");
    a->send(b->local(), "two");
    loop.run();
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0], (std::pair<TimeMs, std::string>{2, "one"}));
    EXPECT_EQ(got[1].second, "two");
    EXPECT_EQ(net.delivered(), 2u);
}

TEST(Loopback, DropsToUnboundAndRejectsDoubleBind) {
    EventLoop loop;
    LoopbackNetwork net(loop);
    auto a = net.bind({"127.0.0.1", 1000});
    EXPECT_THROW(net.bind({"127.0.0.1", 1000}), BindFailure);
    a->send({"127.0.0.1", 9}, "nobody");
    loop.run();
    EXPECT_EQ(net.dropped(), 1u);
}

TEST(Loopback, UnbindOnDestruction) {
    EventLoop loop;
    LoopbackNetwork net(loop);
    { auto a = net.bind({"127.0.0.1", 1000}); }
    EXPECT_FALSE(net.is_bound({"127.0.0.1", 1000}));
    EXPECT_NO_THROW(net.bind({"127.0.0.1", 1000}));
}

TEST(Loopback, TapsSeeEveryDatagram) {
    EventLoop loop;
    LoopbackNetwork net(loop);
    std::vector<Datagram> seen;
    net.add_tap([&](const Datagram& d) { seen.push_back(d); });
    auto a = net.bind({"127.0.0.1", 1000});
    a->send({"127.0.0.1", 2000}, "x");
    loop.run();
    ASSERT_EQ(seen.size(), 1u);
    EXPECT_EQ(seen[0].to.port, 2000);
}

TEST(Udp, RoundTripOnLocalhost) {
    EventLoop loop(ClockMode::Realtime);
    std::unique_ptr<UdpTransport> a, b;
    try {
        a = std::make_unique<UdpTransport>(loop, Address{"127.0.0.1", 0});
        b = std::make_unique<UdpTransport>(loop, Address{"127.0.0.1", 0});
    } catch (const BindFailure& e) {
        GTEST_SKIP() << "no UDP sockets here: " << e.what();
    }
    std::string got;
    b->on_receive([&](const Address&, const std::string& bytes) {
        got = bytes;
        loop.stop();
    });
    a->send(b->local(), "ping");
    loop.after(2000, [&] { loop.stop(); });
    loop.run();
    EXPECT_EQ(got, "ping");
}

TEST(Udp, NeedsRealtimeLoop) {
    EventLoop loop;
    EXPECT_THROW(UdpTransport(loop, Address{"127.0.0.1", 0}), BindFailure);
}
