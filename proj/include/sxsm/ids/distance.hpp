#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "sxsm/ids/trace.hpp"

namespace sxsm::ids {

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SingularCovariance : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ZeroMassHistogram : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

double euclidean(const std::vector<double>& a, const std::vector<double>& b);
/// Squared Euclidean distance.
double quadratic(const std::vector<double>& a, const std::vector<double>& b);
/// sqrt((a-b)^T S^-1 (a-b)); S must be symmetric positive-definite.
double mahalanobis(const std::vector<double>& a, const std::vector<double>& b, const Eigen::MatrixXd& covariance);

enum class Metric { Euclidean, Quadratic, Mahalanobis };

/// Dispatches to one of the three metrics; `covariance` is used for
/// Mahalanobis only.
double profile_distance(const std::vector<double>& a, const std::vector<double>& b, Metric metric,
                        const Eigen::MatrixXd& covariance = {});

/// (1/sqrt 2) * sqrt(sum_k (sqrt p_k - sqrt q_k)^2) over the key union of the
/// normalized histograms.
double hellinger(const Histogram& p, const Histogram& q);

}  // namespace sxsm::ids
