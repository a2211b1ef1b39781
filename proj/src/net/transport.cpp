#include "sxsm/net/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

namespace sxsm::net {

Address Address::parse(std::string_view text) {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0) throw std::invalid_argument("expected ip:port, got " + std::string(text));
    unsigned port = 0;
    auto digits = text.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || port == 0 || port > 65535)
        throw std::invalid_argument("bad port in " + std::string(text));
    return Address{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

class LoopbackNetwork::Endpoint : public Transport {
public:
    Endpoint(LoopbackNetwork& net, Address local) : net_(net), local_(std::move(local)) {}
    ~Endpoint() override {
        if (*alive_) net_.endpoints_.erase(local_);
    }

    Address local() const override { return local_; }
    void send(const Address& to, std::string bytes) override {
        if (!*alive_) throw TransportError("loopback network is gone");
        net_.transmit(local_, to, std::move(bytes));
    }
    EventLoop& loop() override { return net_.loop_; }

    void receive(const Address& from, const std::string& bytes) { deliver(from, bytes); }

    std::shared_ptr<bool> alive_;

private:
    LoopbackNetwork& net_;
    Address local_;
};

LoopbackNetwork::LoopbackNetwork(EventLoop& loop, TimeMs latency_ms)
    : loop_(loop), latency_(latency_ms), alive_(std::make_shared<bool>(true)) {}

LoopbackNetwork::~LoopbackNetwork() { *alive_ = false; }

std::unique_ptr<Transport> LoopbackNetwork::bind(const Address& address) {
    if (address.port == 0) throw BindFailure("port 0 is not bindable on loopback");
    if (endpoints_.contains(address)) throw BindFailure("address in use: " + address.str());
    auto ep = std::make_unique<Endpoint>(*this, address);
    ep->alive_ = alive_;
    endpoints_[address] = ep.get();
    return ep;
}

void LoopbackNetwork::transmit(const Address& from, const Address& to, std::string bytes) {
    Datagram dg{loop_.now(), from, to, std::move(bytes)};
    for (const auto& tap : taps_) tap(dg);
    auto alive = alive_;
    loop_.after(latency_, [this, alive, dg = std::move(dg)] {
        if (!*alive) return;
        auto it = endpoints_.find(dg.to);
        if (it == endpoints_.end()) {
            ++dropped_;
            return;
        }
        ++delivered_;
        it->second->receive(dg.from, dg.bytes);
    });
}

UdpTransport::UdpTransport(EventLoop& loop, const Address& local) : loop_(loop), local_(local) {
    if (loop.mode() != ClockMode::Realtime) throw BindFailure("UDP transport needs a realtime event loop");
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw BindFailure(std::string("socket: ") + std::strerror(errno));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(local.port);
    if (::inet_pton(AF_INET, local.ip.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        throw BindFailure("not an IPv4 address: " + local.ip);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        auto err = std::string(std::strerror(errno));
        ::close(fd_);
        throw BindFailure("bind " + local.str() + ": " + err);
    }
    if (local_.port == 0) {
        socklen_t len = sizeof addr;
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        local_.port = ntohs(addr.sin_port);
    }
    ::fcntl(fd_, F_SETFL, ::fcntl(fd_, F_GETFL) | O_NONBLOCK);
    loop_.add_reader(fd_, [this] { drain(); });
}

UdpTransport::~UdpTransport() {
    loop_.remove_reader(fd_);
    ::close(fd_);
}

void UdpTransport::send(const Address& to, std::string bytes) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(to.port);
    if (::inet_pton(AF_INET, to.ip.c_str(), &addr.sin_addr) != 1) throw TransportError("not an IPv4 address: " + to.ip);
    auto n = ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    if (n < 0) throw TransportError(std::string("sendto: ") + std::strerror(errno));
}

void UdpTransport::drain() {
    char buf[65536];
    while (true) {
        sockaddr_in from{};
        socklen_t len = sizeof from;
        auto n = ::recvfrom(fd_, buf, sizeof buf, 0, reinterpret_cast<sockaddr*>(&from), &len);
        if (n < 0) return;
        char ip[INET_ADDRSTRLEN];
        ::inet_ntop(AF_INET, &from.sin_addr, ip, sizeof ip);
        deliver(Address{ip, ntohs(from.sin_port)}, std::string(buf, static_cast<std::size_t>(n)));
    }
}

}  // namespace sxsm::net
