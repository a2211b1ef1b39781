#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <unordered_map>
#include <vector>

namespace sxsm::net {

/// Milliseconds on the loop's clock.
using TimeMs = std::int64_t;

enum class ClockMode {
    /// Time jumps straight to the next due timer. Runs are reproducible.
    Virtual,
    /// Wall-clock pacing; required when real sockets are polled.
    Realtime,
};

/// Single-threaded scheduler shared by every endpoint of a run. Timers due
/// at the same instant fire in the order they were scheduled.
class EventLoop {
public:
    using TimerId = std::uint64_t;
    using Task = std::function<void()>;

    explicit EventLoop(ClockMode mode = ClockMode::Virtual);

    ClockMode mode() const { return mode_; }
    TimeMs now() const;

    TimerId at(TimeMs when, Task task);
    TimerId after(TimeMs delay, Task task) { return at(now() + delay, std::move(task)); }
    TimerId post(Task task) { return at(now(), std::move(task)); }
    /// No-op for unknown or already fired timers.
    void cancel(TimerId id);

    /// Realtime only: `on_readable` runs whenever `fd` has data.
    void add_reader(int fd, Task on_readable);
    void remove_reader(int fd);

    /// Runs until no timer is pending (and no reader is registered), or
    /// until stop().
    void run();
    /// Runs while `keep_going()` holds and work remains.
    void run_while(const std::function<bool()>& keep_going);
    /// Fires everything due at or before `t`; a virtual clock then rests at `t`.
    void run_until(TimeMs t);

    void stop() { stopped_ = true; }
    bool stopped() const { return stopped_; }
    void reset_stop() { stopped_ = false; }

    std::size_t pending_timers() const { return timers_.size(); }

private:
    using Key = std::pair<TimeMs, TimerId>;

    bool step(TimeMs limit, bool bounded);
    void poll_readers(TimeMs wait_ms);

    ClockMode mode_;
    TimeMs virtual_now_ = 0;
    std::chrono::steady_clock::time_point origin_;
    TimerId next_id_ = 1;
    std::map<Key, Task> timers_;
    std::unordered_map<TimerId, TimeMs> when_;
    std::map<int, Task> readers_;
    bool stopped_ = false;
};

}  // namespace sxsm::net
