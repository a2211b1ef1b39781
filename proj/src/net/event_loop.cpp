#include "sxsm/net/event_loop.hpp"

#include <poll.h>

#include <algorithm>
#include <thread>

namespace sxsm::net {

namespace {
constexpr TimeMs kMaxIdlePollMs = 100;
}

EventLoop::EventLoop(ClockMode mode) : mode_(mode), origin_(std::chrono::steady_clock::now()) {}

TimeMs EventLoop::now() const {
    if (mode_ == ClockMode::Virtual) return virtual_now_;
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - origin_).count();
}

EventLoop::TimerId EventLoop::at(TimeMs when, Task task) {
    auto id = next_id_++;
    when = std::max(when, now());
    timers_.emplace(Key{when, id}, std::move(task));
    when_.emplace(id, when);
    return id;
}

void EventLoop::cancel(TimerId id) {
    auto it = when_.find(id);
    if (it == when_.end()) return;
    timers_.erase(Key{it->second, id});
    when_.erase(it);
}

void EventLoop::add_reader(int fd, Task on_readable) { readers_[fd] = std::move(on_readable); }

void EventLoop::remove_reader(int fd) { readers_.erase(fd); }

void EventLoop::poll_readers(TimeMs wait_ms) {
    if (readers_.empty()) {
        if (wait_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(wait_ms));
        return;
    }
    std::vector<pollfd> fds;
    for (const auto& [fd, _] : readers_) fds.push_back(pollfd{fd, POLLIN, 0});
    int ready = ::poll(fds.data(), fds.size(), static_cast<int>(std::max<TimeMs>(wait_ms, 0)));
    if (ready <= 0) return;
    for (const auto& p : fds) {
        if (!(p.revents & POLLIN)) continue;
        auto it = readers_.find(p.fd);
        if (it != readers_.end()) {
            auto task = it->second;
            task();
        }
    }
}

// Executes at most one timer (or one wait for IO). Returns false when there
// is nothing left to do before `limit`.
bool EventLoop::step(TimeMs limit, bool bounded) {
    if (stopped_) return false;
    if (mode_ == ClockMode::Virtual) {
        if (timers_.empty()) return false;
        auto it = timers_.begin();
        if (bounded && it->first.first > limit) return false;
        virtual_now_ = std::max(virtual_now_, it->first.first);
        auto task = std::move(it->second);
        when_.erase(it->first.second);
        timers_.erase(it);
        task();
        return true;
    }

    if (timers_.empty() && readers_.empty()) return false;
    auto current = now();
    if (bounded && current >= limit && (timers_.empty() || timers_.begin()->first.first > limit)) return false;
    if (!timers_.empty() && timers_.begin()->first.first <= current) {
        auto it = timers_.begin();
        auto task = std::move(it->second);
        when_.erase(it->first.second);
        timers_.erase(it);
        task();
        // drain sockets between timers so inbound traffic is not starved
        if (!readers_.empty()) poll_readers(0);
        return true;
    }
    TimeMs wait = timers_.empty() ? kMaxIdlePollMs : timers_.begin()->first.first - current;
    if (bounded) wait = std::min(wait, limit - current);
    poll_readers(std::clamp<TimeMs>(wait, 0, kMaxIdlePollMs));
    return true;
}

void EventLoop::run() {
    while (step(0, false)) {
    }
}

void EventLoop::run_while(const std::function<bool()>& keep_going) {
    while (keep_going() && step(0, false)) {
    }
}

void EventLoop::run_until(TimeMs t) {
    while (step(t, true)) {
    }
    if (mode_ == ClockMode::Virtual && !stopped_) virtual_now_ = std::max(virtual_now_, t);
}

}  // namespace sxsm::net
