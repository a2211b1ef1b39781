#include "sxsm/defenses/lists.hpp"

namespace sxsm::defenses {

void ListStore::add_white(const std::string& callee, const std::string& caller) {
    std::lock_guard lock(mutex_);
    auto& l = per_callee_[callee];
    if (l.black.count(caller)) throw ListConflict(caller + " is black-listed by " + callee);
    l.white.insert(caller);
    l.grey.erase(caller);
}

void ListStore::add_black(const std::string& callee, const std::string& caller) {
    std::lock_guard lock(mutex_);
    auto& l = per_callee_[callee];
    if (l.white.count(caller)) throw ListConflict(caller + " is white-listed by " + callee);
    l.black.insert(caller);
    l.grey.erase(caller);
}

void ListStore::remove(const std::string& callee, const std::string& caller) {
    std::lock_guard lock(mutex_);
    auto& l = per_callee_[callee];
    l.white.erase(caller);
    l.black.erase(caller);
    l.grey.erase(caller);
}

void ListStore::add_global_black(const std::string& caller) {
    std::lock_guard lock(mutex_);
    global_black_.insert(caller);
}

void ListStore::approve(const std::string& callee, const std::string& caller) {
    std::lock_guard lock(mutex_);
    auto& l = per_callee_[callee];
    if (l.black.count(caller)) throw ListConflict(caller + " is black-listed by " + callee);
    l.grey.erase(caller);
    l.white.insert(caller);
}

bool ListStore::is_white(const std::string& callee, const std::string& caller) const {
    std::lock_guard lock(mutex_);
    auto it = per_callee_.find(callee);
    return it != per_callee_.end() && it->second.white.count(caller);
}

bool ListStore::is_black(const std::string& callee, const std::string& caller) const {
    std::lock_guard lock(mutex_);
    if (global_black_.count(caller)) return true;
    auto it = per_callee_.find(callee);
    return it != per_callee_.end() && it->second.black.count(caller);
}

std::optional<TimeMs> ListStore::grey_since(const std::string& callee, const std::string& caller, TimeMs now) const {
    std::lock_guard lock(mutex_);
    auto it = per_callee_.find(callee);
    if (it == per_callee_.end()) return std::nullopt;
    auto g = it->second.grey.find(caller);
    if (g == it->second.grey.end() || now - g->second > options_.grey_ttl_ms) return std::nullopt;
    return g->second;
}

Verdict ListStore::check(const std::string& caller, const std::string& callee, TimeMs now) {
    std::lock_guard lock(mutex_);
    auto& l = per_callee_[callee];
    if (global_black_.count(caller) || l.black.count(caller)) return Verdict::reject(603, "blacklist");
    if (l.white.count(caller)) return Verdict::forward();
    switch (options_.mode) {
    case ListMode::Black: return Verdict::forward();
    case ListMode::White: return Verdict::reject(603, "not white-listed");
    case ListMode::Grey:
    case ListMode::Consent: break;
    }
    auto g = l.grey.find(caller);
    if (g != l.grey.end() && now - g->second <= options_.grey_ttl_ms && now - g->second <= options_.retry_window_ms) {
        if (options_.mode == ListMode::Grey && options_.promote_on_retry) {
            l.grey.erase(g);
            l.white.insert(caller);
        }
        return Verdict::forward();
    }
    l.grey[caller] = now;
    return Verdict::reject(480, "greylist");
}

std::vector<std::string> ListStore::shared_white_list(const std::string& requester, const std::string& owner) const {
    std::lock_guard lock(mutex_);
    if (!options_.shared_white_list) throw ListAccessDenied("shared white lists are disabled");
    auto mine = per_callee_.find(requester);
    if (mine == per_callee_.end() || !mine->second.white.count(owner))
        throw ListAccessDenied(owner + " is not on " + requester + "'s white list");
    auto theirs = per_callee_.find(owner);
    if (theirs == per_callee_.end()) return {};
    return {theirs->second.white.begin(), theirs->second.white.end()};
}

int ListStore::black_occurrences(const std::string& caller) const {
    std::lock_guard lock(mutex_);
    int n = global_black_.count(caller) ? 1 : 0;
    for (const auto& [_, l] : per_callee_) n += static_cast<int>(l.black.count(caller));
    return n;
}

}  // namespace sxsm::defenses
