#include "sxsm/ids/honeypot.hpp"

#include <cstdio>
#include <fstream>

namespace sxsm::ids {

void HoneypotSpace::validate() const {
    for (const auto& id : honeypot)
        if (assigned.count(id)) throw OverlappingSpace(id + " is both assigned and a honeypot");
}

Route HoneypotSpace::route(const sip::SipUri& request_uri) const {
    return assigned.count(request_uri.identity()) ? Route::Normal : Route::Honeypot;
}

void HoneypotLog::append(HoneypotRecord record) {
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(record));
}

std::vector<HoneypotRecord> HoneypotLog::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::size_t HoneypotLog::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::set<std::string> HoneypotLog::sources() const {
    std::lock_guard lock(mutex_);
    std::set<std::string> out;
    for (const auto& r : records_) out.insert(r.source_uri);
    return out;
}

bool HoneypotLog::contains_source(const std::string& identity) const {
    std::lock_guard lock(mutex_);
    for (const auto& r : records_)
        if (r.source_uri == identity) return true;
    return false;
}

std::string HoneypotLog::to_csv() const {
    std::lock_guard lock(mutex_);
    std::string out = "timestamp,source_uri,source_addr,method,target_uri\n";
    char ts[32];
    for (const auto& r : records_) {
        std::snprintf(ts, sizeof ts, "%lld.%03lld", static_cast<long long>(r.time_ms / 1000),
                      static_cast<long long>(r.time_ms % 1000));
        out += std::string(ts) + "," + r.source_uri + "," + r.source_addr + "," + r.method + "," + r.target_uri + "\n";
    }
    return out;
}

void HoneypotLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_csv();
}

}  // namespace sxsm::ids
