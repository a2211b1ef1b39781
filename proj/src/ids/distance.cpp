#include "sxsm/ids/distance.hpp"

#include <cmath>
#include <set>

#include <Eigen/Cholesky>

namespace sxsm::ids {

namespace {

void check_dims(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw DimensionMismatch("vectors of size " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
}

double mass(const Histogram& h) {
    double total = 0;
    for (const auto& [_, v] : h) {
        if (v < 0) throw ZeroMassHistogram("negative bin mass");
        total += v;
    }
    if (!(total > 0)) throw ZeroMassHistogram("histogram has no mass");
    return total;
}

}  // namespace

double quadratic(const std::vector<double>& a, const std::vector<double>& b) {
    check_dims(a, b);
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
    return sum;
}

double euclidean(const std::vector<double>& a, const std::vector<double>& b) { return std::sqrt(quadratic(a, b)); }

double mahalanobis(const std::vector<double>& a, const std::vector<double>& b, const Eigen::MatrixXd& covariance) {
    check_dims(a, b);
    auto n = static_cast<Eigen::Index>(a.size());
    if (covariance.rows() != n || covariance.cols() != n)
        throw DimensionMismatch("covariance is " + std::to_string(covariance.rows()) + "x" +
                                std::to_string(covariance.cols()) + " for dimension " + std::to_string(n));
    if (!covariance.isApprox(covariance.transpose())) throw SingularCovariance("covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success) throw SingularCovariance("covariance is not positive-definite");
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
    // d^T S^-1 d = |L^-1 d|^2
    Eigen::VectorXd y = llt.matrixL().solve(d);
    return std::sqrt(y.squaredNorm());
}

double profile_distance(const std::vector<double>& a, const std::vector<double>& b, Metric metric,
                        const Eigen::MatrixXd& covariance) {
    switch (metric) {
    case Metric::Euclidean: return euclidean(a, b);
    case Metric::Quadratic: return quadratic(a, b);
    case Metric::Mahalanobis: return mahalanobis(a, b, covariance);
    }
    return 0;
}

double hellinger(const Histogram& p, const Histogram& q) {
    double mp = mass(p), mq = mass(q);
    std::set<std::string> keys;
    for (const auto& [k, _] : p) keys.insert(k);
    for (const auto& [k, _] : q) keys.insert(k);
    double sum = 0;
    for (const auto& k : keys) {
        auto ip = p.find(k), iq = q.find(k);
        double a = ip == p.end() ? 0 : std::sqrt(ip->second / mp);
        double b = iq == q.end() ? 0 : std::sqrt(iq->second / mq);
        sum += (a - b) * (a - b);
    }
    return std::min(1.0, std::sqrt(sum) / std::sqrt(2.0));
}

}  // namespace sxsm::ids
