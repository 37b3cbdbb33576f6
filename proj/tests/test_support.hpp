#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "ratekit/data_model.hpp"
#include "ratekit/rng.hpp"

namespace testutil {

/// Design matrix wrapper for tests that work on raw numeric designs.
inline ratekit::DesignMatrix make_design(const Eigen::MatrixXd& x) {
    ratekit::DesignMatrix d;
    d.values = x;
    d.column_names.push_back("(Intercept)");
    for (Eigen::Index j = 1; j < x.cols(); ++j)
        d.column_names.push_back("x" + std::to_string(j));
    return d;
}

/// Intercept-plus-noise design: column 0 ones, remaining columns standard normal.
inline ratekit::DesignMatrix random_design(Eigen::Index n, Eigen::Index k,
                                           ratekit::RngStream& rng) {
    Eigen::MatrixXd x(n, k);
    x.col(0).setOnes();
    for (Eigen::Index j = 1; j < k; ++j)
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = rng.next_normal();
    return make_design(x);
}

/// The asymmetric least-squares objective the expectile fit minimises.
inline double asymmetric_loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& gamma, double tau) {
    const Eigen::VectorXd u = y - x * gamma;
    double total = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double w = u(i) <= 0.0 ? 1.0 - tau : tau;
        total += w * u(i) * u(i);
    }
    return total;
}

/// Exact pinball minimiser over the sample points (the optimum of the
/// intercept-only quantile problem is attained at an order statistic).
inline double pinball_enumeration_minimizer(const std::vector<double>& values, double tau) {
    double best = values.front();
    double best_obj = std::numeric_limits<double>::infinity();
    for (double cand : values) {
        double obj = 0.0;
        for (double v : values) {
            const double u = v - cand;
            obj += u >= 0.0 ? tau * u : (tau - 1.0) * u;
        }
        if (obj < best_obj) {
            best_obj = obj;
            best = cand;
        }
    }
    return best;
}

} // namespace testutil
