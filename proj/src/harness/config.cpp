#include "sxsm/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "sxsm/scenario/scenario.hpp"

namespace sxsm::harness {

namespace pt = boost::property_tree;
using defenses::ListMode;

std::string GateSpec::get(const std::string& key, const std::string& fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

double GateSpec::number(const std::string& key, double fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    try {
        std::size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(type + " gate: " + key + " is not a number: " + it->second);
}

bool GateSpec::flag(const std::string& key, bool fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    if (it->second == "true" || it->second == "yes" || it->second == "1") return true;
    if (it->second == "false" || it->second == "no" || it->second == "0") return false;
    throw ConfigError(type + " gate: " + key + " is not a boolean: " + it->second);
}

const std::vector<std::string>& gate_types() {
    static const std::vector<std::string> types{"lists",  "passive_fp", "active_fp", "reputation", "turing",
                                                "puzzle", "payment",    "ids",       "honeypot"};
    return types;
}

void DefenseConfig::validate() const {
    if (name.empty()) throw ConfigError("defense without name");
    for (const auto& g : chain) {
        if (std::find(gate_types().begin(), gate_types().end(), g.type) == gate_types().end())
            throw ConfigError("unknown gate type " + g.type);
        if ((g.type == "passive_fp" || g.type == "active_fp") && fingerprint_db.empty())
            throw ConfigError(name + ": " + g.type + " needs <fingerprints path=.../>");
        if (g.type == "ids" && g.get("model").empty()) throw ConfigError(name + ": ids gate needs a model");
        if (g.type == "ids") {
            auto action = g.get("action", "quarantine");
            if (action != "quarantine" && action != "reject") throw ConfigError("ids action " + action);
            double t = g.number("threshold", 0.8);
            if (t < 0 || t > 1) throw ConfigError("ids threshold outside [0,1]");
        }
    }
    if (puzzle_bits < 1 || puzzle_bits > 40) throw ConfigError("puzzle_bits outside [1,40]");
    if (challenge_expiry_ms <= 0) throw ConfigError("challenge expiry must be positive");
}

namespace {

std::string identity(std::string uri) {
    if (uri.rfind("sip:", 0) == 0) uri.erase(0, 4);
    if (uri.find('@') == std::string::npos) throw ConfigError("identity without host: " + uri);
    return uri;
}

ListMode list_mode(const std::string& text) {
    if (text == "black") return ListMode::Black;
    if (text == "white") return ListMode::White;
    if (text == "grey") return ListMode::Grey;
    if (text == "consent") return ListMode::Consent;
    throw ConfigError("unknown list mode " + text);
}

template <typename T>
T attr(const pt::ptree& node, const std::string& name, T fallback) {
    try {
        return node.get<T>("<xmlattr>." + name, fallback);
    } catch (const pt::ptree_error& e) {
        throw ConfigError("attribute " + name + ": " + e.what());
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

DefenseConfig parse_defense_config(std::string_view xml, const std::filesystem::path& base_dir) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
        throw ConfigError(std::string("defense config: ") + e.what());
    }
    auto root = tree.get_child_optional("defense");
    if (!root) throw ConfigError("defense config: missing <defense> root");

    DefenseConfig c;
    c.name = attr<std::string>(*root, "name", "");
    c.endpoint.domain = attr<std::string>(*root, "domain", c.endpoint.domain);
    c.endpoint.authenticate_source = true;

    for (const auto& [tag, node] : *root) {
        if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
        if (tag == "proxy") {
            auto& e = c.endpoint;
            e.authenticate_source = attr(node, "authenticate_source", e.authenticate_source);
            e.options_always_200 = attr(node, "options_always_200", e.options_always_200);
            e.feedback_header = attr(node, "feedback_header", e.feedback_header);
            e.simulated_feedback = attr(node, "simulated_feedback", e.simulated_feedback);
            e.probe_timeout_ms = attr(node, "probe_timeout_ms", e.probe_timeout_ms);
        } else if (tag == "fingerprints") {
            c.fingerprint_db = resolve(base_dir, attr<std::string>(node, "path", ""));
        } else if (tag == "users" || tag == "decoys") {
            for (const auto& [t, u] : node) {
                if (t != "user") continue;
                auto id = identity(attr<std::string>(u, "uri", ""));
                if (tag == "decoys") {
                    c.decoys.push_back(id);
                    continue;
                }
                defenses::SimulatedUser su;
                su.online = attr(u, "online", su.online);
                su.ring_ms = attr(u, "ring_ms", su.ring_ms);
                c.endpoint.users[id] = su;
            }
        } else if (tag == "lists") {
            auto& o = c.lists;
            o.mode = list_mode(attr<std::string>(node, "mode", "grey"));
            o.retry_window_ms = attr(node, "retry_window_ms", o.retry_window_ms);
            o.grey_ttl_ms = attr(node, "ttl_ms", o.grey_ttl_ms);
            o.promote_on_retry = attr(node, "promote_on_retry", o.promote_on_retry);
            o.shared_white_list = attr(node, "shared", o.shared_white_list);
            for (const auto& [t, e] : node) {
                if (t != "white" && t != "black") continue;
                auto caller = identity(attr<std::string>(e, "caller", ""));
                auto callee = attr<std::string>(e, "callee", "");
                if (t == "black" && callee.empty())
                    c.global_black.push_back(caller);
                else if (callee.empty())
                    throw ConfigError("white entry without callee");
                else
                    (t == "white" ? c.white : c.black).emplace_back(identity(callee), caller);
            }
        } else if (tag == "reputation") {
            auto& w = c.weights;
            w.feedback = attr(node, "feedback", w.feedback);
            w.blacklist = attr(node, "blacklist", w.blacklist);
            w.density = attr(node, "density", w.density);
            w.short_call = attr(node, "short_call", w.short_call);
        } else if (tag == "ledger") {
            for (const auto& [t, d] : node)
                if (t == "deposit")
                    c.deposits[identity(attr<std::string>(d, "identity", ""))] += attr<std::int64_t>(d, "amount", 0);
        } else if (tag == "challenges") {
            c.puzzle_bits = attr(node, "puzzle_bits", c.puzzle_bits);
            c.challenge_expiry_ms = attr(node, "expiry_ms", c.challenge_expiry_ms);
        } else if (tag == "chain") {
            for (const auto& [t, g] : node) {
                if (t != "gate") continue;
                GateSpec spec;
                if (auto attrs = g.get_child_optional("<xmlattr>"))
                    for (const auto& [k, v] : *attrs) spec.params[k] = v.data();
                spec.type = spec.get("type");
                spec.params.erase("type");
                if (spec.params.count("model")) spec.params["model"] = resolve(base_dir, spec.params["model"]).string();
                c.chain.push_back(std::move(spec));
            }
        } else {
            throw ConfigError("defense config: unknown element <" + tag + ">");
        }
    }
    c.validate();
    return c;
}

DefenseConfig load_defense_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = scenario::read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError("cannot read " + path.string() + ": " + e.what());
    }
    return parse_defense_config(text, path.parent_path());
}

defenses::Chain build_chain(const DefenseConfig& config, defenses::DefenseStores& stores) {
    config.validate();
    defenses::Chain chain;
    for (const auto& g : config.chain) {
        std::unique_ptr<defenses::Gate> gate;
        if (g.type == "lists") {
            gate = std::make_unique<defenses::ListGate>(stores.lists, g.flag("promote", false));
        } else if (g.type == "passive_fp") {
            gate = std::make_unique<defenses::PassiveFingerprintGate>(stores.fingerprints);
        } else if (g.type == "active_fp") {
            gate = std::make_unique<defenses::ActiveFingerprintGate>(stores.fingerprints);
        } else if (g.type == "reputation") {
            defenses::ReputationThresholds t;
            t.reject_below = g.number("reject_below", t.reject_below);
            t.challenge_below = g.number("challenge_below", t.challenge_below);
            gate = std::make_unique<defenses::ReputationGate>(stores.reputation, t,
                                                              g.flag("ledger", true) ? &stores.ledger : nullptr,
                                                              static_cast<std::int64_t>(g.number("amount", 1000)));
        } else if (g.type == "turing") {
            gate = std::make_unique<defenses::TuringGate>(stores.turing);
        } else if (g.type == "puzzle") {
            gate = std::make_unique<defenses::PuzzleGate>(stores.puzzles);
        } else if (g.type == "payment") {
            gate = std::make_unique<defenses::PaymentGate>(stores.ledger,
                                                           static_cast<std::int64_t>(g.number("amount", 1000)));
        } else if (g.type == "ids") {
            ids::CptModel model;
            try {
                model = ids::load_cpt(g.get("model"));
            } catch (const std::exception& e) {
                throw ConfigError("ids model " + g.get("model") + ": " + e.what());
            }
            auto action = g.get("action", "quarantine") == "reject" ? defenses::IdsGate::Action::Reject
                                                                     : defenses::IdsGate::Action::Quarantine;
            gate = std::make_unique<defenses::IdsGate>(std::move(model),
                                                       static_cast<net::TimeMs>(g.number("window_ms", 60'000)),
                                                       g.number("threshold", 0.8), action);
        } else if (g.type == "honeypot") {
            ids::HoneypotSpace space;
            for (const auto& [id, user] : config.endpoint.users) space.assigned.insert(id);
            space.honeypot.insert(config.decoys.begin(), config.decoys.end());
            try {
                gate = std::make_unique<defenses::HoneypotGate>(std::move(space), stores.honeypot);
            } catch (const ids::OverlappingSpace& e) {
                throw ConfigError(config.name + ": " + e.what());
            }
        }
        gate->skip_trusted = g.flag("skip_trusted", false);
        chain.add(std::move(gate));
    }
    return chain;
}

DefenseDeployment::DefenseDeployment(DefenseConfig config, net::Transport& transport, std::uint64_t seed)
    : config_(std::move(config)) {
    config_.validate();
    stores_ = std::make_unique<defenses::DefenseStores>(seed, config_.puzzle_bits, config_.challenge_expiry_ms,
                                                        config_.lists, config_.weights);
    if (!config_.fingerprint_db.empty()) {
        try {
            stores_->fingerprints = defenses::load_fingerprint_db(config_.fingerprint_db);
        } catch (const std::exception& e) {
            throw ConfigError("fingerprint db " + config_.fingerprint_db.string() + ": " + e.what());
        }
    }
    try {
        for (const auto& [callee, caller] : config_.white) stores_->lists.add_white(callee, caller);
        for (const auto& [callee, caller] : config_.black) stores_->lists.add_black(callee, caller);
    } catch (const defenses::ListConflict& e) {
        throw ConfigError(config_.name + ": " + e.what());
    }
    for (const auto& caller : config_.global_black) stores_->lists.add_global_black(caller);
    for (const auto& [id, amount] : config_.deposits) stores_->ledger.deposit(id, amount);
    endpoint_ = std::make_unique<defenses::DefenseEndpoint>(transport, *stores_, build_chain(config_, *stores_),
                                                            config_.endpoint);
}

}  // namespace sxsm::harness
