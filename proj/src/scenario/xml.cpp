#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "sxsm/scenario/scenario.hpp"

namespace sxsm::scenario {

namespace pt = boost::property_tree;

namespace {

std::optional<std::string> attr(const pt::ptree& node, const char* name) {
    if (auto a = node.get_child_optional("<xmlattr>")) {
        if (auto v = a->get_optional<std::string>(name)) return *v;
    }
    return std::nullopt;
}

std::string required_attr(const pt::ptree& node, const char* element, const char* name) {
    auto v = attr(node, name);
    if (!v || v->empty())
        throw ScenarioError(ErrorKind::InvalidStep, std::string(element) + " requires " + name);
    return *v;
}

int int_attr(const std::string& value, const char* what) {
    try {
        std::size_t used = 0;
        int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ScenarioError(ErrorKind::InvalidStep, std::string(what) + "=" + value);
    }
}

std::optional<bool> yes_no(const std::optional<std::string>& v) {
    if (!v) return std::nullopt;
    if (*v == "yes" || *v == "true") return true;
    if (*v == "no" || *v == "false") return false;
    throw ScenarioError(ErrorKind::InvalidStep, "strict=" + *v);
}

Step parse_step(const std::string& element, const pt::ptree& node) {
    if (element == "send") {
        Send s;
        s.template_name = attr(node, "template").value_or("");
        if (s.template_name.empty()) s.text = node.data();
        if (s.template_name.empty() && s.text.find_first_not_of(" \t\r\n") == std::string::npos)
            throw ScenarioError(ErrorKind::InvalidStep, "send requires template or inline text");
        return s;
    }
    if (element == "recv") {
        Recv r;
        auto method = attr(node, "method");
        auto status = attr(node, "status");
        if (method.has_value() == status.has_value())
            throw ScenarioError(ErrorKind::InvalidStep, "recv requires exactly one of method, status");
        if (method)
            r.matcher = Matcher::for_method(*method, yes_no(attr(node, "strict")));
        else
            r.matcher = Matcher::for_status_pattern(*status);
        if (auto jump = attr(node, "jump")) r.jump = *jump;
        if (auto t = attr(node, "timeout_ms")) r.timeout_ms = int_attr(*t, "timeout_ms");
        return r;
    }
    if (element == "pause") return Pause{int_attr(required_attr(node, "pause", "ms"), "ms")};
    if (element == "label") return Label{required_attr(node, "label", "name")};
    if (element == "stop") {
        auto intent = attr(node, "intent").value_or("success");
        if (intent == "success") return Stop{ExitIntent::Success};
        if (intent == "aborted") return Stop{ExitIntent::Aborted};
        throw ScenarioError(ErrorKind::InvalidStep, "stop intent=" + intent);
    }
    throw ScenarioError(ErrorKind::UnknownStepKind, element);
}

}  // namespace

Scenario load_scenario(std::string_view xml) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, tree, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        throw ScenarioError(ErrorKind::XmlSyntax, e.message() + " at line " + std::to_string(e.line()));
    }
    auto root = tree.get_child_optional("scenario");
    if (!root) throw ScenarioError(ErrorKind::XmlSyntax, "root element must be <scenario>");
    Scenario sc;
    sc.name = attr(*root, "name").value_or("");
    sc.set = attr(*root, "set").value_or("std");
    for (const auto& [element, node] : *root) {
        if (element == "<xmlattr>" || element == "<xmlcomment>") continue;
        sc.steps.push_back(parse_step(element, node));
    }
    sc.validate();
    return sc;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
    auto sc = load_scenario(read_file(path));
    if (sc.name.empty()) sc.name = path.stem().string();
    return sc;
}

std::string save_scenario(const Scenario& scenario) {
    pt::ptree root;
    root.put("<xmlattr>.name", scenario.name);
    root.put("<xmlattr>.set", scenario.set);
    for (const auto& step : scenario.steps) {
        pt::ptree node;
        std::string element;
        if (auto* s = std::get_if<Send>(&step)) {
            element = "send";
            if (s->text.empty())
                node.put("<xmlattr>.template", s->template_name);
            else
                node.put_value(s->text);
        } else if (auto* r = std::get_if<Recv>(&step)) {
            element = "recv";
            if (r->matcher.kind == Matcher::Kind::Method) {
                node.put("<xmlattr>.method", r->matcher.method);
                if (r->matcher.strict) node.put("<xmlattr>.strict", *r->matcher.strict ? "yes" : "no");
            } else {
                node.put("<xmlattr>.status", r->matcher.pattern());
            }
            if (r->jump) node.put("<xmlattr>.jump", *r->jump);
            if (r->timeout_ms) node.put("<xmlattr>.timeout_ms", *r->timeout_ms);
        } else if (auto* p = std::get_if<Pause>(&step)) {
            element = "pause";
            node.put("<xmlattr>.ms", p->ms);
        } else if (auto* l = std::get_if<Label>(&step)) {
            element = "label";
            node.put("<xmlattr>.name", l->name);
        } else if (auto* st = std::get_if<Stop>(&step)) {
            element = "stop";
            node.put("<xmlattr>.intent", st->intent == ExitIntent::Success ? "success" : "aborted");
        }
        root.add_child(element, node);
    }
    pt::ptree tree;
    tree.add_child("scenario", root);
    std::ostringstream out;
    pt::write_xml(out, tree, pt::xml_writer_make_settings<std::string>(' ', 2));
    return out.str();
}

}  // namespace sxsm::scenario
