#include "sxsm/defenses/reputation.hpp"

#include <algorithm>
#include <stdexcept>

namespace sxsm::defenses {

double reputation_score(const ReputationStats& s, const ReputationWeights& w, TimeMs now) {
    auto in_window = std::count_if(s.recent_calls.begin(), s.recent_calls.end(), [&](TimeMs t) {
        return t > now - ReputationStore::kDensityWindowMs && t <= now;
    });
    double density = static_cast<double>(in_window) / 24.0;
    double short_ratio = s.call_count ? static_cast<double>(s.short_calls) / static_cast<double>(s.call_count) : 0;
    return w.feedback * s.feedback_sum - w.blacklist * s.blacklist_occurrences - w.density * density -
           w.short_call * short_ratio;
}

void ReputationStore::update(const std::string& identity, const ReputationEvent& event, TimeMs now) {
    std::lock_guard lock(mutex_);
    auto& s = stats_[identity];
    if (const auto* f = std::get_if<reputation_event::Feedback>(&event)) {
        s.feedback_sum += f->value;
    } else if (const auto* c = std::get_if<reputation_event::CallEnded>(&event)) {
        ++s.call_count;
        s.total_call_seconds += c->seconds;
        if (c->seconds < kShortCallSeconds) ++s.short_calls;
        s.recent_calls.push_back(now);
        while (!s.recent_calls.empty() && s.recent_calls.front() <= now - kDensityWindowMs) s.recent_calls.pop_front();
    } else {
        ++s.blacklist_occurrences;
    }
}

double ReputationStore::score(const std::string& identity, TimeMs now) const {
    std::lock_guard lock(mutex_);
    auto it = stats_.find(identity);
    return it == stats_.end() ? 0 : reputation_score(it->second, weights_, now);
}

Verdict ReputationStore::check(const std::string& identity, const ReputationThresholds& t, TimeMs now) const {
    if (t.reject_below > t.challenge_below) throw std::invalid_argument("reject_below must not exceed challenge_below");
    double s = score(identity, now);
    if (s < t.reject_below) return Verdict::reject(603, "reputation");
    if (s < t.challenge_below) return Verdict::challenge_with(ChallengeKind::Payment, {});
    return Verdict::forward();
}

ReputationStats ReputationStore::stats(const std::string& identity) const {
    std::lock_guard lock(mutex_);
    auto it = stats_.find(identity);
    return it == stats_.end() ? ReputationStats{} : it->second;
}

}  // namespace sxsm::defenses
