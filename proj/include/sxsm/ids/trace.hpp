#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "sxsm/net/event_loop.hpp"
#include "sxsm/sip/message.hpp"

namespace sxsm::ids {

using net::TimeMs;

/// Direction relative to the monitored party.
enum class Direction {
    /// Sent by the monitored party (its requests).
    FromSource,
    /// Sent to the monitored party (responses it receives).
    ToSource,
};

/// A datagram that did not parse.
struct ParseFailure {
    sip::ParseErrorKind kind = sip::ParseErrorKind::MalformedStartLine;
};

struct TraceEvent {
    TimeMs time = 0;
    Direction direction = Direction::FromSource;
    std::variant<sip::SipMessage, ParseFailure> payload;

    /// Parses `bytes`; a parse error becomes a ParseFailure event.
    static TraceEvent from_datagram(TimeMs time, Direction direction, std::string_view bytes);
};

using Histogram = std::map<std::string, double>;

/// Traffic variables of one detection window.
struct TraceWindow {
    double duration_s = 0;
    double request_intensity = 0;         // requests / min
    double error_response_intensity = 0;  // responses >= 400 / min
    double parsing_error_intensity = 0;   // unparsable datagrams / min
    double distinct_destinations = 0;     // unique To identities of requests
    double max_waiting_dialogs = 0;       // INVITEs minus final INVITE responses, peak
    double opened_rtp_ports = 0;          // media is not simulated
    Histogram request_distribution;       // method -> count
    Histogram response_distribution;      // "1xx".."6xx" -> count

    friend bool operator==(const TraceWindow&, const TraceWindow&) = default;
};

/// Computes every variable over `events` (time-sorted) for a window of
/// `duration_s` seconds. Intensities are normalized by the window length.
TraceWindow extract_window(const std::vector<TraceEvent>& events, double duration_s);

/// Names accepted by value_of: the scalar variables, plus
/// "request_distribution:<METHOD>" and "response_distribution:<Nxx>" which
/// yield the fraction of that key's mass (0 for an empty histogram).
double value_of(const TraceWindow& window, const std::string& variable);

const std::vector<std::string>& scalar_variables();

}  // namespace sxsm::ids
