#pragma once

#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <variant>

#include "sxsm/defenses/verdict.hpp"

namespace sxsm::defenses {

struct ReputationWeights {
    double feedback = 1;    // w_f
    double blacklist = 5;   // w_b
    double density = 0.1;   // w_d
    double short_call = 2;  // w_l
};

struct ReputationStats {
    double feedback_sum = 0;
    std::int64_t call_count = 0;
    double total_call_seconds = 0;
    std::int64_t short_calls = 0;
    int blacklist_occurrences = 0;
    /// End times of calls inside the last day, oldest first.
    std::deque<TimeMs> recent_calls;
};

namespace reputation_event {
struct Feedback {
    double value = 0;
};
struct CallEnded {
    double seconds = 0;
};
struct Blacklisted {};
}  // namespace reputation_event

using ReputationEvent =
    std::variant<reputation_event::Feedback, reputation_event::CallEnded, reputation_event::Blacklisted>;

struct ReputationThresholds {
    double reject_below = -1;
    double challenge_below = 3;
};

class ReputationStore {
public:
    static constexpr TimeMs kDensityWindowMs = 86'400'000;
    static constexpr double kShortCallSeconds = 10;

    explicit ReputationStore(ReputationWeights weights = {}) : weights_(weights) {}

    const ReputationWeights& weights() const { return weights_; }

    void update(const std::string& identity, const ReputationEvent& event, TimeMs now);

    /// w_f·feedback − w_b·blacklist − w_d·(calls/h over the last day) −
    /// w_l·(share of calls under 10 s). Unknown identities score 0.
    double score(const std::string& identity, TimeMs now) const;

    /// score < reject_below -> Reject(603), < challenge_below ->
    /// Challenge(Payment), else Forward.
    Verdict check(const std::string& identity, const ReputationThresholds& thresholds, TimeMs now) const;

    ReputationStats stats(const std::string& identity) const;

private:
    ReputationWeights weights_;
    mutable std::mutex mutex_;
    std::map<std::string, ReputationStats> stats_;
};

/// Score of a statistics record, without the store.
double reputation_score(const ReputationStats& stats, const ReputationWeights& weights, TimeMs now);

}  // namespace sxsm::defenses
