#include "sxsm/ids/trace.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace sxsm::ids {

TraceEvent TraceEvent::from_datagram(TimeMs time, Direction direction, std::string_view bytes) {
    try {
        return TraceEvent{time, direction, sip::parse(bytes)};
    } catch (const sip::ParseError& e) {
        return TraceEvent{time, direction, ParseFailure{e.kind()}};
    }
}

TraceWindow extract_window(const std::vector<TraceEvent>& events, double duration_s) {
    TraceWindow w;
    w.duration_s = duration_s;
    if (events.empty() || duration_s <= 0) return w;

    double requests = 0, errors = 0, parse_errors = 0;
    std::set<std::string> destinations;
    std::set<std::string> waiting;
    std::size_t peak = 0;
    for (const auto& ev : events) {
        if (std::holds_alternative<ParseFailure>(ev.payload)) {
            ++parse_errors;
            continue;
        }
        const auto& msg = std::get<sip::SipMessage>(ev.payload);
        if (msg.is_request()) {
            if (ev.direction != Direction::FromSource) continue;
            ++requests;
            w.request_distribution[std::string(msg.method())] += 1;
            if (auto to = msg.to_uri())
                destinations.insert(to->identity());
            else if (const auto* ruri = msg.request_uri())
                destinations.insert(ruri->identity());
            if (msg.method() == "INVITE") waiting.insert(msg.call_id());
            peak = std::max(peak, waiting.size());
        } else {
            if (ev.direction != Direction::ToSource) continue;
            auto status = msg.status();
            w.response_distribution[std::to_string(status / 100) + "xx"] += 1;
            if (status >= 400) ++errors;
            if (status >= 200 && msg.cseq_method() == "INVITE") waiting.erase(msg.call_id());
        }
    }
    double minutes = duration_s / 60.0;
    w.request_intensity = requests / minutes;
    w.error_response_intensity = errors / minutes;
    w.parsing_error_intensity = parse_errors / minutes;
    w.distinct_destinations = static_cast<double>(destinations.size());
    w.max_waiting_dialogs = static_cast<double>(peak);
    return w;
}

const std::vector<std::string>& scalar_variables() {
    static const std::vector<std::string> names{
        "duration",           "request_intensity",   "error_response_intensity", "parsing_error_intensity",
        "distinct_destinations", "max_waiting_dialogs", "opened_rtp_ports",
    };
    return names;
}

namespace {
double fraction(const Histogram& h, const std::string& key) {
    double total = 0;
    for (const auto& [_, v] : h) total += v;
    if (total <= 0) return 0;
    auto it = h.find(key);
    return it == h.end() ? 0 : it->second / total;
}
}  // namespace

double value_of(const TraceWindow& w, const std::string& variable) {
    if (variable == "duration") return w.duration_s;
    if (variable == "request_intensity") return w.request_intensity;
    if (variable == "error_response_intensity") return w.error_response_intensity;
    if (variable == "parsing_error_intensity") return w.parsing_error_intensity;
    if (variable == "distinct_destinations") return w.distinct_destinations;
    if (variable == "max_waiting_dialogs") return w.max_waiting_dialogs;
    if (variable == "opened_rtp_ports") return w.opened_rtp_ports;
    auto colon = variable.find(':');
    if (colon != std::string::npos) {
        auto family = variable.substr(0, colon);
        auto key = variable.substr(colon + 1);
        if (family == "request_distribution") return fraction(w.request_distribution, key);
        if (family == "response_distribution") return fraction(w.response_distribution, key);
    }
    throw std::invalid_argument("unknown trace variable: " + variable);
}

}  // namespace sxsm::ids
