#pragma once

#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sxsm/ids/distance.hpp"
#include "sxsm/ids/trace.hpp"

namespace sxsm::ids {

inline constexpr TimeMs kDayMs = 86'400'000;

struct CallRecord {
    std::string caller;  // identity (user@host)
    std::string callee;
    TimeMs start_ms = 0;
    double duration_s = 0;
};

/// Statistics of one section of the day.
struct SectionMetrics {
    double calls = 0;
    double recipients = 0;
    double avg_duration_s = 0;

    friend bool operator==(const SectionMetrics&, const SectionMetrics&) = default;
};

struct AccountProfile {
    std::string account;
    double section_length_s = 3600;
    /// Completed learning days behind `long_term`; 0 means no baseline.
    int learning_days = 0;
    /// Per section, daily averages over the learning period.
    std::vector<SectionMetrics> long_term;
    /// Per section, daily averages over the detection period.
    std::vector<SectionMetrics> short_term;
    Histogram long_callees;
    Histogram short_callees;

    std::size_t sections() const;
    /// Sections flattened as (calls, recipients, avg duration) triples.
    std::vector<double> long_vector() const;
    std::vector<double> short_vector() const;
};

/// Per-section daily averages of `account`'s calls starting in
/// [from_ms, from_ms + days·24h). Calls are bucketed by time of day.
std::vector<SectionMetrics> section_metrics(const std::vector<CallRecord>& records, const std::string& account,
                                            TimeMs from_ms, int days, double section_length_s = 3600);

Histogram callee_histogram(const std::vector<CallRecord>& records, const std::string& account, TimeMs from_ms,
                           TimeMs to_ms);

/// Learning period [learn_from, +learning_days), detection period
/// [detect_from, +detect_days).
AccountProfile build_profile(const std::vector<CallRecord>& records, const std::string& account, TimeMs learn_from,
                             int learning_days, TimeMs detect_from, int detect_days = 1,
                             double section_length_s = 3600);

struct DetectionThresholds {
    Metric metric = Metric::Euclidean;
    Eigen::MatrixXd covariance;
    double distance = 50;
    double hellinger = 0.5;
};

struct AccountDetection {
    enum class Verdict { Normal, Abnormal } verdict = Verdict::Normal;
    /// Set when no learning data exists; the verdict is then Normal.
    bool no_baseline = false;
    /// "profile_distance" and/or "callee_hellinger".
    std::vector<std::string> evidence;
    double distance = 0;
    double hellinger = 0;

    bool abnormal() const { return verdict == Verdict::Abnormal; }
};

/// An empty callee histogram on exactly one side counts as Hellinger 1, on
/// both sides as 0.
AccountDetection detect_account(const AccountProfile& profile, const DetectionThresholds& thresholds = {});

/// Append-only call record store shared between the defense endpoint and
/// detectors.
class CallRecordStore {
public:
    void append(CallRecord record);
    std::vector<CallRecord> snapshot() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<CallRecord> records_;
};

}  // namespace sxsm::ids
