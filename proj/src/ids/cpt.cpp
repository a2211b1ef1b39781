#include "sxsm/ids/cpt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace sxsm::ids {

std::size_t CptVariable::bin(double value) const {
    if (std::isnan(value)) throw UnbinnableValue(name + ": NaN");
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        if (value >= edges[i] && value < edges[i + 1]) return i;
    throw UnbinnableValue(name + ": " + std::to_string(value) + " outside every bin");
}

std::size_t CptModel::class_index(const std::string& name) const {
    auto it = std::find(classes.begin(), classes.end(), name);
    if (it == classes.end()) throw ModelError("unknown class " + name);
    return static_cast<std::size_t>(it - classes.begin());
}

std::size_t CptModel::variable_index(const std::string& name) const {
    for (std::size_t i = 0; i < variables.size(); ++i)
        if (variables[i].name == name) return i;
    throw ModelError("unknown variable " + name);
}

void CptModel::validate() const {
    if (classes.empty()) throw ModelError("model without classes");
    if (prior.size() != classes.size()) throw ModelError("prior size differs from class count");
    double mass = 0;
    for (double p : prior) {
        if (p < 0) throw ModelError("negative prior");
        mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-9) throw ModelError("prior does not sum to 1");
    if (!(epsilon > 0 && epsilon < 1)) throw ModelError("epsilon must be in (0,1)");
    if (likelihood.size() != classes.size()) throw ModelError("likelihood table has wrong class count");
    for (const auto& v : variables) {
        if (v.bin_count() == 0) throw ModelError(v.name + ": needs at least two edges");
        if (!std::is_sorted(v.edges.begin(), v.edges.end()) ||
            std::adjacent_find(v.edges.begin(), v.edges.end()) != v.edges.end())
            throw ModelError(v.name + ": edges must increase strictly");
    }
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (likelihood[c].size() != variables.size()) throw ModelError(classes[c] + ": wrong variable count");
        for (std::size_t v = 0; v < variables.size(); ++v) {
            const auto& row = likelihood[c][v];
            if (row.size() != variables[v].bin_count())
                throw ModelError(classes[c] + "/" + variables[v].name + ": wrong bin count");
            double sum = 0;
            for (double x : row) {
                if (x < 0 || x > 1) throw ModelError(classes[c] + "/" + variables[v].name + ": value outside [0,1]");
                sum += x;
            }
            if (!(sum > 0) || sum > static_cast<double>(row.size()) + 1e-12)
                throw ModelError(classes[c] + "/" + variables[v].name + ": row mass out of range");
        }
    }
}

double CptModel::factor(const std::string& cls, const std::string& variable, double value) const {
    auto v = variable_index(variable);
    return std::max(likelihood[class_index(cls)][v][variables[v].bin(value)], epsilon);
}

Posterior infer_values(const std::map<std::string, double>& values, const CptModel& model) {
    std::vector<std::size_t> bins;
    bins.reserve(model.variables.size());
    for (const auto& v : model.variables) {
        auto it = values.find(v.name);
        if (it == values.end()) throw UnbinnableValue(v.name + ": no value");
        bins.push_back(v.bin(it->second));
    }
    std::vector<double> log_scores(model.classes.size());
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
        double s = std::log(std::max(model.prior[c], std::numeric_limits<double>::min()));
        if (model.prior[c] == 0) s = -std::numeric_limits<double>::infinity();
        for (std::size_t v = 0; v < model.variables.size(); ++v)
            s += std::log(std::max(model.likelihood[c][v][bins[v]], model.epsilon));
        log_scores[c] = s;
    }
    double top = *std::max_element(log_scores.begin(), log_scores.end());
    double total = 0;
    for (double s : log_scores) total += std::exp(s - top);
    Posterior post;
    for (std::size_t c = 0; c < model.classes.size(); ++c) post[model.classes[c]] = std::exp(log_scores[c] - top) / total;
    return post;
}

Posterior infer(const TraceWindow& window, const CptModel& model) {
    std::map<std::string, double> values;
    for (const auto& v : model.variables) values[v.name] = value_of(window, v.name);
    return infer_values(values, model);
}

std::pair<std::string, double> top_class(const Posterior& posterior, const CptModel& model) {
    std::pair<std::string, double> best{"", -1};
    for (const auto& cls : model.classes) {
        auto p = posterior.at(cls);
        if (p > best.second) best = {cls, p};
    }
    return best;
}

namespace {

namespace pt = boost::property_tree;

std::vector<double> numbers(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string token;
    while (in >> token) {
        if (token == "inf" || token == "+inf")
            out.push_back(std::numeric_limits<double>::infinity());
        else if (token == "-inf")
            out.push_back(-std::numeric_limits<double>::infinity());
        else {
            try {
                std::size_t used = 0;
                out.push_back(std::stod(token, &used));
                if (used != token.size()) throw std::invalid_argument(token);
            } catch (const std::exception&) {
                throw ModelError(what + ": not a number: " + token);
            }
        }
    }
    return out;
}

}  // namespace

CptModel parse_cpt(std::string_view xml) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, tree, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        throw ModelError("CPT XML: " + e.message());
    }
    auto root = tree.get_child_optional("cpt");
    if (!root) throw ModelError("root element must be <cpt>");
    CptModel m;
    try {
        m.epsilon = root->get("<xmlattr>.epsilon", 1e-6);
        for (const auto& [element, node] : *root) {
            if (element != "class") continue;
            m.classes.push_back(node.get<std::string>("<xmlattr>.name"));
            m.prior.push_back(node.get<double>("<xmlattr>.prior"));
        }
        m.likelihood.assign(m.classes.size(), {});
        for (const auto& [element, node] : *root) {
            if (element != "variable") continue;
            CptVariable var{node.get<std::string>("<xmlattr>.name"), numbers(node.get<std::string>("<xmlattr>.edges"), "edges")};
            auto v = m.variables.size();
            m.variables.push_back(var);
            for (auto& per_class : m.likelihood) per_class.emplace_back();
            for (const auto& [child, row] : node) {
                if (child != "likelihood") continue;
                auto cls = row.get<std::string>("<xmlattr>.class");
                auto c = m.class_index(cls);
                m.likelihood[c][v] = numbers(row.get<std::string>("<xmlattr>.values"), cls + "/" + var.name);
                m.origin[cls + "/" + var.name] = row.get("<xmlattr>.origin", "default");
            }
            for (std::size_t c = 0; c < m.classes.size(); ++c)
                if (m.likelihood[c][v].empty())
                    throw ModelError(m.classes[c] + "/" + var.name + ": missing likelihood row");
        }
    } catch (const pt::ptree_error& e) {
        throw ModelError(std::string("CPT: ") + e.what());
    }
    m.validate();
    return m;
}

CptModel load_cpt(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_cpt(ss.str());
}

}  // namespace sxsm::ids
