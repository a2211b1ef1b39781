#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sxsm/net/event_loop.hpp"

namespace sxsm::net {

struct Address {
    std::string ip;
    std::uint16_t port = 0;

    std::string str() const { return ip + ":" + std::to_string(port); }
    /// "ip:port".
    static Address parse(std::string_view text);

    friend auto operator<=>(const Address&, const Address&) = default;
    friend bool operator==(const Address&, const Address&) = default;
};

class BindFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One datagram endpoint. Handlers run on the owning EventLoop.
class Transport {
public:
    using Handler = std::function<void(const Address& from, const std::string& bytes)>;

    virtual ~Transport() = default;
    virtual Address local() const = 0;
    virtual void send(const Address& to, std::string bytes) = 0;
    virtual EventLoop& loop() = 0;

    void on_receive(Handler handler) { handler_ = std::move(handler); }

protected:
    void deliver(const Address& from, const std::string& bytes) {
        if (handler_) handler_(from, bytes);
    }

private:
    Handler handler_;
};

struct Datagram {
    TimeMs time = 0;
    Address from;
    Address to;
    std::string bytes;
};

/// In-process datagram network: lossless, FIFO, fixed latency. Datagrams
/// addressed to nobody are dropped (the sender sees a timeout, as on a
/// real network).
class LoopbackNetwork {
public:
    using Tap = std::function<void(const Datagram&)>;

    explicit LoopbackNetwork(EventLoop& loop, TimeMs latency_ms = 1);
    ~LoopbackNetwork();
    LoopbackNetwork(const LoopbackNetwork&) = delete;
    LoopbackNetwork& operator=(const LoopbackNetwork&) = delete;

    /// Throws BindFailure when the address is taken.
    std::unique_ptr<Transport> bind(const Address& address);
    bool is_bound(const Address& address) const { return endpoints_.contains(address); }

    /// Observes every datagram at send time.
    void add_tap(Tap tap) { taps_.push_back(std::move(tap)); }

    EventLoop& loop() { return loop_; }
    std::size_t delivered() const { return delivered_; }
    std::size_t dropped() const { return dropped_; }

private:
    class Endpoint;
    friend class Endpoint;

    void transmit(const Address& from, const Address& to, std::string bytes);

    EventLoop& loop_;
    TimeMs latency_;
    std::map<Address, Endpoint*> endpoints_;
    std::vector<Tap> taps_;
    std::shared_ptr<bool> alive_;
    std::size_t delivered_ = 0;
    std::size_t dropped_ = 0;
};

/// Non-blocking IPv4 UDP socket registered with a realtime EventLoop.
class UdpTransport : public Transport {
public:
    UdpTransport(EventLoop& loop, const Address& local);
    ~UdpTransport() override;
    UdpTransport(const UdpTransport&) = delete;
    UdpTransport& operator=(const UdpTransport&) = delete;

    Address local() const override { return local_; }
    void send(const Address& to, std::string bytes) override;
    EventLoop& loop() override { return loop_; }

private:
    void drain();

    EventLoop& loop_;
    Address local_;
    int fd_ = -1;
};

}  // namespace sxsm::net
