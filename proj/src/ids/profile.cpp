#include "sxsm/ids/profile.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace sxsm::ids {

std::size_t AccountProfile::sections() const { return long_term.size(); }

namespace {

std::vector<double> flatten(const std::vector<SectionMetrics>& sections) {
    std::vector<double> out;
    out.reserve(sections.size() * 3);
    for (const auto& s : sections) {
        out.push_back(s.calls);
        out.push_back(s.recipients);
        out.push_back(s.avg_duration_s);
    }
    return out;
}

std::size_t section_count(double section_length_s) {
    if (!(section_length_s > 0) || section_length_s > 86400)
        throw std::invalid_argument("section length must be in (0, 86400] s");
    return static_cast<std::size_t>(std::ceil(86400.0 / section_length_s));
}

}  // namespace

std::vector<double> AccountProfile::long_vector() const { return flatten(long_term); }
std::vector<double> AccountProfile::short_vector() const { return flatten(short_term); }

std::vector<SectionMetrics> section_metrics(const std::vector<CallRecord>& records, const std::string& account,
                                            TimeMs from_ms, int days, double section_length_s) {
    auto n = section_count(section_length_s);
    std::vector<SectionMetrics> out(n);
    if (days <= 0) return out;
    TimeMs to_ms = from_ms + days * kDayMs;
    // recipients are distinct per (day, section) and then averaged
    std::vector<std::vector<std::set<std::string>>> recipients(static_cast<std::size_t>(days),
                                                               std::vector<std::set<std::string>>(n));
    std::vector<double> duration(n, 0);
    for (const auto& r : records) {
        if (r.caller != account || r.start_ms < from_ms || r.start_ms >= to_ms) continue;
        auto offset = r.start_ms - from_ms;
        auto day = static_cast<std::size_t>(offset / kDayMs);
        auto s = static_cast<std::size_t>(static_cast<double>(offset % kDayMs) / 1000.0 / section_length_s);
        out[s].calls += 1;
        duration[s] += r.duration_s;
        recipients[day][s].insert(r.callee);
    }
    for (std::size_t s = 0; s < n; ++s) {
        double distinct = 0;
        for (const auto& d : recipients) distinct += static_cast<double>(d[s].size());
        out[s].avg_duration_s = out[s].calls > 0 ? duration[s] / out[s].calls : 0;
        out[s].calls /= days;
        out[s].recipients = distinct / days;
    }
    return out;
}

Histogram callee_histogram(const std::vector<CallRecord>& records, const std::string& account, TimeMs from_ms,
                           TimeMs to_ms) {
    Histogram h;
    for (const auto& r : records)
        if (r.caller == account && r.start_ms >= from_ms && r.start_ms < to_ms) h[r.callee] += 1;
    return h;
}

AccountProfile build_profile(const std::vector<CallRecord>& records, const std::string& account, TimeMs learn_from,
                             int learning_days, TimeMs detect_from, int detect_days, double section_length_s) {
    AccountProfile p;
    p.account = account;
    p.section_length_s = section_length_s;
    p.learning_days = std::max(learning_days, 0);
    p.long_term = section_metrics(records, account, learn_from, p.learning_days, section_length_s);
    p.short_term = section_metrics(records, account, detect_from, detect_days, section_length_s);
    p.long_callees = callee_histogram(records, account, learn_from, learn_from + p.learning_days * kDayMs);
    p.short_callees = callee_histogram(records, account, detect_from, detect_from + detect_days * kDayMs);
    return p;
}

AccountDetection detect_account(const AccountProfile& profile, const DetectionThresholds& thresholds) {
    AccountDetection d;
    if (profile.learning_days < 1 || profile.long_term.empty()) {
        d.no_baseline = true;
        return d;
    }
    d.distance = profile_distance(profile.short_vector(), profile.long_vector(), thresholds.metric,
                                  thresholds.covariance);
    bool short_empty = profile.short_callees.empty(), long_empty = profile.long_callees.empty();
    if (short_empty && long_empty)
        d.hellinger = 0;
    else if (short_empty || long_empty)
        d.hellinger = 1;
    else
        d.hellinger = hellinger(profile.short_callees, profile.long_callees);
    if (d.distance > thresholds.distance) d.evidence.push_back("profile_distance");
    if (d.hellinger > thresholds.hellinger) d.evidence.push_back("callee_hellinger");
    if (!d.evidence.empty()) d.verdict = AccountDetection::Verdict::Abnormal;
    return d;
}

void CallRecordStore::append(CallRecord record) {
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(record));
}

std::vector<CallRecord> CallRecordStore::snapshot() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::size_t CallRecordStore::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

}  // namespace sxsm::ids
