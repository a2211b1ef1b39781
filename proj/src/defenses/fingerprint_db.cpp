#include "sxsm/defenses/fingerprint_db.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace sxsm::defenses {

sip::HeaderFingerprint DeviceProfile::fingerprint(const std::string& method) const {
    auto it = layouts.find(method);
    if (it == layouts.end()) throw FingerprintDbError(label + " has no " + method + " layout");
    return sip::HeaderFingerprint::from_names(it->second, label);
}

const BehaviorRow* DeviceProfile::behavior_for(const std::string& probe) const {
    for (const auto& row : behavior)
        if (row.probe == probe) return &row;
    return nullptr;
}

void FingerprintDb::validate() const {
    if (devices.empty()) throw FingerprintDbError("fingerprint db without devices");
    std::set<std::string> labels;
    for (const auto& d : devices) {
        if (d.label.empty()) throw FingerprintDbError("device without label");
        if (!labels.insert(d.label).second) throw FingerprintDbError("duplicate device label " + d.label);
        if (d.layouts.empty()) throw FingerprintDbError(d.label + ": no header layout");
        for (const auto& [method, names] : d.layouts)
            if (names.empty()) throw FingerprintDbError(d.label + ": empty " + method + " layout");
        for (const char* probe : {kCompliantProbe, kMalformedProbe})
            if (!d.behavior_for(probe)) throw FingerprintDbError(d.label + ": no behavior for probe " + probe);
    }
}

std::vector<std::string> FingerprintDb::probes() const { return {kCompliantProbe, kMalformedProbe}; }

const DeviceProfile& FingerprintDb::device(const std::string& label) const {
    for (const auto& d : devices)
        if (d.label == label) return d;
    throw FingerprintDbError("unknown device " + label);
}

const DeviceProfile* FingerprintDb::match_layout(const sip::SipMessage& msg) const {
    auto method = std::string(msg.method());
    auto fp = sip::fingerprint_of(msg);
    for (const auto& d : devices) {
        auto it = d.layouts.find(method);
        if (it != d.layouts.end() && sip::HeaderFingerprint::from_names(it->second).same_layout(fp)) return &d;
    }
    return nullptr;
}

bool FingerprintDb::knows_method(const std::string& method) const {
    for (const auto& d : devices)
        if (d.layouts.count(method)) return true;
    return false;
}

namespace {

bool row_matches(const BehaviorRow& row, const ProbeObservation& obs) {
    if (!obs.response) return row.status == 0;
    if (obs.response->status() != row.status) return false;
    for (const auto& [name, value] : row.headers) {
        auto h = obs.response->header(name);
        if (!h || *h != value) return false;
    }
    return true;
}

}  // namespace

const DeviceProfile* FingerprintDb::match_behavior(const std::vector<ProbeObservation>& observations) const {
    for (const auto& d : devices) {
        bool all = !observations.empty();
        for (const auto& obs : observations) {
            const auto* row = d.behavior_for(obs.probe);
            if (!row || !row_matches(*row, obs)) {
                all = false;
                break;
            }
        }
        if (all) return &d;
    }
    return nullptr;
}

Verdict passive_check(const sip::SipMessage& msg, const FingerprintDb& db) {
    if (!db.knows_method(std::string(msg.method())))
        return db.forward_unknown_method ? Verdict::forward() : Verdict::reject(403, "fingerprint");
    return db.match_layout(msg) ? Verdict::forward() : Verdict::reject(403, "fingerprint");
}

Verdict active_verdict(const std::vector<ProbeObservation>& observations, const FingerprintDb& db) {
    return db.match_behavior(observations) ? Verdict::forward() : Verdict::reject(403, "fingerprint");
}

namespace pt = boost::property_tree;

FingerprintDb parse_fingerprint_db(std::string_view xml) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, tree, pt::xml_parser::no_comments | pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
        throw FingerprintDbError("fingerprint XML: " + e.message());
    }
    auto root = tree.get_child_optional("fingerprints");
    if (!root) throw FingerprintDbError("root element must be <fingerprints>");
    FingerprintDb db;
    try {
        db.forward_unknown_method = root->get("<xmlattr>.unknown_method", "forward") == "forward";
        for (const auto& [element, node] : *root) {
            if (element != "device") continue;
            DeviceProfile d;
            d.label = node.get<std::string>("<xmlattr>.label");
            for (const auto& [child, c] : node) {
                if (child == "layout") {
                    std::vector<std::string> names;
                    auto text = c.get_value<std::string>();
                    boost::split(names, text, boost::is_any_of(", \n\t"), boost::token_compress_on);
                    names.erase(std::remove(names.begin(), names.end(), ""), names.end());
                    d.layouts[c.get<std::string>("<xmlattr>.method")] = names;
                } else if (child == "behavior") {
                    BehaviorRow row;
                    row.probe = c.get<std::string>("<xmlattr>.probe");
                    auto status = c.get<std::string>("<xmlattr>.status");
                    row.status = status == "timeout" ? 0 : std::stoi(status);
                    for (const auto& [h, hn] : c)
                        if (h == "header")
                            row.headers.emplace_back(hn.get<std::string>("<xmlattr>.name"),
                                                     hn.get<std::string>("<xmlattr>.value"));
                    d.behavior.push_back(row);
                }
            }
            db.devices.push_back(std::move(d));
        }
    } catch (const pt::ptree_error& e) {
        throw FingerprintDbError(std::string("fingerprint db: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FingerprintDbError(std::string("fingerprint db: bad status: ") + e.what());
    }
    db.validate();
    return db;
}

FingerprintDb load_fingerprint_db(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FingerprintDbError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_fingerprint_db(ss.str());
}

}  // namespace sxsm::defenses
