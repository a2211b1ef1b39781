#include "sxsm/defenses/registrar.hpp"

#include <algorithm>

namespace sxsm::defenses {

void Registrar::bind(const std::string& identity, const net::Address& contact, TimeMs expires_ms, TimeMs now) {
    std::lock_guard lock(mutex_);
    auto& hist = history_[identity];
    // the previous binding ends where the new one starts
    if (!hist.empty() && hist.back().expires_at > now) hist.back().expires_at = now;
    Binding b{contact, now, now + expires_ms};
    bindings_[identity] = b;
    hist.push_back(b);
    changes_.push_back({now, identity, contact});
}

void Registrar::unbind(const std::string& identity, TimeMs now) {
    std::lock_guard lock(mutex_);
    bindings_.erase(identity);
    auto& hist = history_[identity];
    if (!hist.empty() && hist.back().expires_at > now) hist.back().expires_at = now;
    changes_.push_back({now, identity, std::nullopt});
}

std::optional<net::Address> Registrar::lookup(const std::string& identity, TimeMs now) const {
    std::lock_guard lock(mutex_);
    auto it = bindings_.find(identity);
    if (it == bindings_.end() || it->second.expires_at <= now) return std::nullopt;
    return it->second.contact;
}

std::vector<Registrar::Change> Registrar::timeline(const std::string& identity) const {
    std::lock_guard lock(mutex_);
    std::vector<Change> out;
    for (const auto& c : changes_)
        if (c.identity == identity) out.push_back(c);
    return out;
}

double Registrar::binding_share(const std::string& identity, const net::Address& contact, TimeMs from,
                                TimeMs to) const {
    if (to <= from) return 0;
    std::lock_guard lock(mutex_);
    auto it = history_.find(identity);
    if (it == history_.end()) return 0;
    TimeMs covered = 0;
    for (const auto& b : it->second) {
        if (b.contact != contact) continue;
        auto lo = std::max(from, b.bound_at), hi = std::min(to, b.expires_at);
        if (hi > lo) covered += hi - lo;
    }
    return static_cast<double>(covered) / static_cast<double>(to - from);
}

}  // namespace sxsm::defenses
