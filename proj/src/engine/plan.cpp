#include "sxsm/engine/plan.hpp"

#include <charconv>
#include <numeric>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace sxsm::engine {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

Rate Rate::parse(std::string_view text) {
    auto bad = [&] { return PlanInvalid("bad rate: " + std::string(text)); };
    auto slash = text.find('/');
    auto to_int = [&](std::string_view s) {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) throw bad();
        return v;
    };
    Rate r{to_int(text.substr(0, slash)), slash == std::string_view::npos ? 1 : to_int(text.substr(slash + 1))};
    if (r.num <= 0 || r.den <= 0) throw bad();
    auto g = std::gcd(r.num, r.den);
    return {r.num / g, r.den / g};
}

std::string Rate::str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }

net::TimeMs Rate::start_offset_ms(std::int64_t i) const {
    // round-half-up of i * 1000 * den / num
    auto scaled = i * 1000 * den;
    return (2 * scaled + num) / (2 * num);
}

void ShootPlan::validate() const {
    if (entries.empty()) throw PlanInvalid("plan has no entries");
    if (remote.port == 0 || local.port == 0) throw PlanInvalid("port 0 in plan");
    if (global_timeout_ms <= 0 || recv_timeout_ms <= 0) throw PlanInvalid("timeouts must be positive");
    for (const auto& e : entries) {
        if (e.rate.num <= 0 || e.rate.den <= 0) throw PlanInvalid("call rate must be > 0");
        if (e.max_calls < 1) throw PlanInvalid("max_calls must be >= 1");
        auto bundle = e.bundle;
        bundle.validate();
        for (const auto& step : bundle.scenario.steps) {
            const auto* send = std::get_if<scenario::Send>(&step);
            if (!send) continue;
            const auto& text = send->text.empty() ? bundle.get_template(send->template_name).text : send->text;
            for (const auto& id : scenario::placeholders(text)) {
                if (id.rfind("field", 0) != 0 || id.size() == 5) continue;
                auto digits = id.substr(5);
                if (digits.find_first_not_of("0123456789") != std::string::npos) continue;
                if (std::stoul(digits) >= callers.arity())
                    throw PlanInvalid("[" + id + "] exceeds the caller table arity " + std::to_string(callers.arity()));
            }
        }
    }
    if (route == Route::Direct && !targets.empty() && targets.arity() < 2)
        throw PlanInvalid("direct route needs target rows with a host column");
}

std::vector<std::string> caller_row(const sip::SipUri& uri, const std::string& display) {
    return {display.empty() ? uri.user : display, uri.user, uri.host};
}

std::vector<std::string> target_row(const sip::SipUri& uri, std::uint16_t default_port) {
    return {uri.user, uri.host, std::to_string(uri.port.value_or(default_port))};
}

namespace {

std::optional<std::string> attr(const pt::ptree& node, const char* name) {
    if (auto a = node.get_child_optional("<xmlattr>"))
        if (auto v = a->get_optional<std::string>(name)) return *v;
    return std::nullopt;
}

net::Address address_of(const pt::ptree& root, const char* element, net::Address fallback) {
    auto node = root.get_child_optional(element);
    if (!node) return fallback;
    auto ip = attr(*node, "ip").value_or(fallback.ip);
    auto port = attr(*node, "port");
    try {
        return net::Address::parse(ip + ":" + port.value_or(std::to_string(fallback.port)));
    } catch (const std::invalid_argument& e) {
        throw PlanInvalid(e.what());
    }
}

fs::path resolve(const fs::path& base, const std::string& ref) {
    fs::path p(ref);
    return p.is_absolute() ? p : base / p;
}

scenario::InjectionTable table_of(const pt::ptree& root, const char* element, const fs::path& base, bool target) {
    auto node = root.get_child_optional(element);
    if (!node) return {};
    if (auto csv = attr(*node, "csv")) return scenario::InjectionTable::load_csv(resolve(base, *csv));
    if (auto uri = attr(*node, "uri")) {
        auto parsed = sip::SipUri::try_parse(*uri);
        if (!parsed) throw PlanInvalid(std::string(element) + " uri is not a SIP URI: " + *uri);
        return scenario::InjectionTable({target ? target_row(*parsed) : caller_row(*parsed, attr(*node, "display").value_or(""))});
    }
    if (auto user = attr(*node, "user"); target && user) {
        std::vector<std::string> row{*user};
        if (auto host = attr(*node, "host")) {
            row.push_back(*host);
            row.push_back(attr(*node, "port").value_or("5060"));
        }
        return scenario::InjectionTable({row});
    }
    throw PlanInvalid(std::string(element) + " needs csv= or uri=");
}

std::int64_t int_of(const std::optional<std::string>& v, std::int64_t fallback, const char* what) {
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        auto n = std::stoll(*v, &used);
        if (used != v->size()) throw std::invalid_argument(*v);
        return n;
    } catch (const std::exception&) {
        throw PlanInvalid(std::string("bad ") + what + ": " + *v);
    }
}

}  // namespace

ShootPlan load_plan(const fs::path& path) {
    pt::ptree tree;
    try {
        std::istringstream in(scenario::read_file(path));
        pt::read_xml(in, tree, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        throw PlanInvalid("plan XML: " + e.message());
    }
    auto root = tree.get_child_optional("plan");
    if (!root) throw PlanInvalid("root element must be <plan>");
    auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    auto library = resolve(base, attr(*root, "library").value_or("."));

    ShootPlan plan;
    plan.remote = address_of(*root, "remote", plan.remote);
    plan.local = address_of(*root, "local", plan.local);
    plan.domain = attr(*root, "domain").value_or(plan.domain);
    plan.global_timeout_ms = int_of(attr(*root, "global_timeout_ms"), plan.global_timeout_ms, "global_timeout_ms");
    plan.recv_timeout_ms = int_of(attr(*root, "recv_timeout_ms"), plan.recv_timeout_ms, "recv_timeout_ms");
    plan.call_id_prefix = attr(*root, "call_id_prefix").value_or(plan.call_id_prefix);
    auto route = attr(*root, "route").value_or("proxy");
    if (route == "proxy")
        plan.route = Route::Proxy;
    else if (route == "direct")
        plan.route = Route::Direct;
    else
        throw PlanInvalid("route must be proxy or direct");
    plan.callers = table_of(*root, "caller", base, false);
    plan.targets = table_of(*root, "target", base, true);

    for (const auto& [element, node] : *root) {
        if (element != "entry") continue;
        ShootEntry entry;
        entry.scenario_ref = attr(node, "scenario").value_or("");
        if (entry.scenario_ref.empty()) throw PlanInvalid("entry without scenario");
        auto file = resolve(base, entry.scenario_ref);
        if (!fs::is_regular_file(file)) file = library / "scenarios" / (entry.scenario_ref + ".xml");
        if (!fs::is_regular_file(file)) throw PlanInvalid("scenario not found: " + entry.scenario_ref);
        entry.bundle = scenario::load_bundle(file, library);
        entry.rate = Rate::parse(attr(node, "rate").value_or("1"));
        entry.max_calls = static_cast<int>(int_of(attr(node, "max_calls"), 1, "max_calls"));
        plan.entries.push_back(std::move(entry));
    }
    plan.validate();
    return plan;
}

fs::path save_plan(const ShootPlan& plan, const fs::path& dir) {
    fs::create_directories(dir);
    pt::ptree root;
    root.put("<xmlattr>.library", ".");
    root.put("<xmlattr>.route", plan.route == Route::Proxy ? "proxy" : "direct");
    root.put("<xmlattr>.domain", plan.domain);
    root.put("<xmlattr>.global_timeout_ms", plan.global_timeout_ms);
    root.put("<xmlattr>.recv_timeout_ms", plan.recv_timeout_ms);
    root.put("<xmlattr>.call_id_prefix", plan.call_id_prefix);
    root.put("remote.<xmlattr>.ip", plan.remote.ip);
    root.put("remote.<xmlattr>.port", plan.remote.port);
    root.put("local.<xmlattr>.ip", plan.local.ip);
    root.put("local.<xmlattr>.port", plan.local.port);
    scenario::write_file(dir / "callers.csv", plan.callers.to_csv());
    scenario::write_file(dir / "targets.csv", plan.targets.to_csv());
    root.put("caller.<xmlattr>.csv", "callers.csv");
    root.put("target.<xmlattr>.csv", "targets.csv");
    for (const auto& e : plan.entries) {
        auto path = scenario::save_bundle(e.bundle, dir);
        pt::ptree node;
        node.put("<xmlattr>.scenario", fs::relative(path, dir).string());
        node.put("<xmlattr>.rate", e.rate.str());
        node.put("<xmlattr>.max_calls", e.max_calls);
        root.add_child("entry", node);
    }
    pt::ptree tree;
    tree.add_child("plan", root);
    std::ostringstream out;
    pt::write_xml(out, tree, pt::xml_writer_make_settings<std::string>(' ', 2));
    auto path = dir / "plan.xml";
    scenario::write_file(path, out.str());
    return path;
}

}  // namespace sxsm::engine
