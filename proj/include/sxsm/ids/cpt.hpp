#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sxsm/ids/trace.hpp"

namespace sxsm::ids {

class UnbinnableValue : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A discretized variable: bin i covers [edges[i], edges[i+1]). The last
/// edge may be +infinity.
struct CptVariable {
    std::string name;
    std::vector<double> edges;

    std::size_t bin_count() const { return edges.size() < 2 ? 0 : edges.size() - 1; }
    /// Throws UnbinnableValue.
    std::size_t bin(double value) const;
};

/// Naive-Bayes conditional probability tables: a prior per class and, per
/// class and variable, a likelihood per bin.
struct CptModel {
    std::vector<std::string> classes;
    std::vector<double> prior;
    std::vector<CptVariable> variables;
    /// likelihood[c][v][bin]
    std::vector<std::vector<std::vector<double>>> likelihood;
    /// Where each row came from ("reference" or "default"), keyed "class/variable".
    std::map<std::string, std::string> origin;
    double epsilon = 1e-6;

    std::size_t class_index(const std::string& name) const;
    std::size_t variable_index(const std::string& name) const;

    /// Checks shapes, prior mass 1 and every row's mass in (0, bin_count].
    void validate() const;

    /// Floored likelihood factor of one variable's value for one class.
    double factor(const std::string& cls, const std::string& variable, double value) const;
};

using Posterior = std::map<std::string, double>;

/// posterior(c) ∝ prior(c) · Π_v max(L_c,v(bin(x_v)), ε), normalized.
/// `values` maps variable name to its observed value.
Posterior infer_values(const std::map<std::string, double>& values, const CptModel& model);
Posterior infer(const TraceWindow& window, const CptModel& model);

/// Highest-posterior class; ties resolve to the earlier class.
std::pair<std::string, double> top_class(const Posterior& posterior, const CptModel& model);

CptModel load_cpt(const std::filesystem::path& path);
CptModel parse_cpt(std::string_view xml);

}  // namespace sxsm::ids
