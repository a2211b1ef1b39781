#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sxsm/defenses/verdict.hpp"

namespace sxsm::defenses {

enum class ListMode {
    /// Black list only; everyone else is forwarded.
    Black,
    /// Only white-listed callers pass.
    White,
    /// Unknown callers are grey-listed and pass on a timely retry.
    Grey,
    /// Grey list whose promotion to white needs the callee's approval.
    Consent,
};

class ListConflict : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ListAccessDenied : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-callee white/black/grey lists. Every operation is atomic.
class ListStore {
public:
    struct Options {
        ListMode mode = ListMode::Grey;
        TimeMs retry_window_ms = 60'000;
        TimeMs grey_ttl_ms = 86'400'000;
        /// Grey mode: a timely retry also moves the caller to white.
        bool promote_on_retry = false;
        bool shared_white_list = false;
    };

    ListStore() = default;
    explicit ListStore(Options options) : options_(options) {}

    const Options& options() const { return options_; }

    /// Throws ListConflict when the caller is on the other list.
    void add_white(const std::string& callee, const std::string& caller);
    void add_black(const std::string& callee, const std::string& caller);
    void remove(const std::string& callee, const std::string& caller);
    /// Black-lists for every callee.
    void add_global_black(const std::string& caller);

    /// Consent: the callee approves a grey caller, who moves to white.
    void approve(const std::string& callee, const std::string& caller);

    bool is_white(const std::string& callee, const std::string& caller) const;
    bool is_black(const std::string& callee, const std::string& caller) const;
    std::optional<TimeMs> grey_since(const std::string& callee, const std::string& caller, TimeMs now) const;

    /// Black -> 603, white -> Forward, grey within window -> Forward, else
    /// the caller is (re)grey-listed and gets 480. White and Black modes
    /// skip the grey stage (White rejects unknown callers with 603).
    Verdict check(const std::string& caller, const std::string& callee, TimeMs now);

    /// White list of `owner`, visible to `requester` when shared mode is on
    /// and `owner` is on requester's own white list. Throws ListAccessDenied.
    std::vector<std::string> shared_white_list(const std::string& requester, const std::string& owner) const;

    /// How many callees black-list `caller` (global entries count once).
    int black_occurrences(const std::string& caller) const;

private:
    struct Lists {
        std::set<std::string> white;
        std::set<std::string> black;
        std::map<std::string, TimeMs> grey;
    };

    Options options_;
    mutable std::mutex mutex_;
    std::map<std::string, Lists> per_callee_;
    std::set<std::string> global_black_;
};

}  // namespace sxsm::defenses
