#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ratekit/data_model.hpp"
#include "ratekit/errors.hpp"
#include "ratekit/linalg.hpp"
#include "ratekit/normal.hpp"

namespace ratekit {

struct ExpectileOptions {
    double tol = 1e-10;
    int max_iter = 100;
};

struct FittedExpectile {
    double tau = 0.5;
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd covariance;  // sandwich W^-1 V W^-1; Var(coef) ~ covariance / n_obs
    Eigen::VectorXd weights_final;
    Eigen::VectorXd residuals_final;
    int iterations = 0;
    bool converged = false;
    Eigen::Index n_obs = 0;
    std::vector<std::string> column_names;

    /// sqrt(diag(sandwich) / N) — the finite-sample standard errors.
    Eigen::VectorXd standard_errors() const {
        return (covariance.diagonal() / static_cast<double>(n_obs)).cwiseSqrt();
    }
};

/// Asymmetric-least-squares sandwich: W = sum w x x' / N, V = sum w^2 u^2 x x' / N,
/// returns W^-1 V W^-1.
inline Eigen::MatrixXd sandwich_covariance(const FittedExpectile& fit,
                                           const DesignMatrix& design) {
    if (!fit.converged)
        throw ValidationError("sandwich_covariance: fit did not converge");
    const Eigen::Index n = design.values.rows();
    const Eigen::Index k = design.values.cols();
    if (fit.residuals_final.size() != n || fit.coefficients.size() != k)
        throw LayoutError("sandwich_covariance: fit does not match design");

    Eigen::MatrixXd w_hat = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd v_hat = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = fit.weights_final(i);
        const double u = fit.residuals_final(i);
        const auto x = design.values.row(i);
        w_hat.noalias() += w * x.transpose() * x;
        v_hat.noalias() += w * w * u * u * x.transpose() * x;
    }
    const double n_inv = 1.0 / static_cast<double>(n);
    w_hat *= n_inv;
    v_hat *= n_inv;
    const Eigen::MatrixXd w_inv = invert_spd(w_hat, design.column_names, "sandwich_covariance");
    return w_inv * v_hat * w_inv;
}

/// Expectile regression by iteratively reweighted least squares. Weights are
/// |tau - 1{u <= 0}| (residual zero counts as non-positive), starting from
/// the ordinary least-squares solution. The objective is convex, so the
/// fixed point is the global minimiser.
inline FittedExpectile fit_expectile(const DesignMatrix& design, const Eigen::VectorXd& y,
                                     double tau, const ExpectileOptions& opt = {}) {
    if (!(tau > 0.0 && tau < 1.0))
        throw ValidationError("fit_expectile: tau must lie in (0,1)");
    const Eigen::Index n = design.values.rows();
    const Eigen::Index k = design.values.cols();
    if (y.size() != n) throw LayoutError("fit_expectile: response length mismatch");
    if (n < k) throw ValidationError("fit_expectile: fewer observations than columns");

    const Eigen::MatrixXd& x = design.values;
    Eigen::VectorXd gamma = solve_spd(x.transpose() * x, x.transpose() * y,
                                      design.column_names, "fit_expectile");

    auto weights_for = [&](const Eigen::VectorXd& g) {
        Eigen::VectorXd w(n);
        const Eigen::VectorXd u = y - x * g;
        for (Eigen::Index i = 0; i < n; ++i) w(i) = u(i) <= 0.0 ? (1.0 - tau) : tau;
        return w;
    };

    bool converged = false;
    int iter = 0;
    Eigen::VectorXd w_prev, w_cur;
    while (iter < opt.max_iter) {
        ++iter;
        w_prev = w_cur;
        w_cur = weights_for(gamma);
        const Eigen::MatrixXd xtwx = x.transpose() * w_cur.asDiagonal() * x;
        const Eigen::VectorXd xtwy = x.transpose() * (w_cur.asDiagonal() * y);
        const Eigen::VectorXd next =
            solve_spd(xtwx, xtwy, design.column_names, "fit_expectile");
        const double max_delta = (next - gamma).cwiseAbs().maxCoeff();
        gamma = next;
        if (max_delta < opt.tol) { converged = true; break; }
    }
    if (!converged) {
        auto low_count = [&](const Eigen::VectorXd& w) {
            long c = 0;
            for (Eigen::Index i = 0; i < w.size(); ++i) c += w(i) == 1.0 - tau;
            return c;
        };
        throw ConvergenceError(
            "fit_expectile: weight sets still changing after " + std::to_string(opt.max_iter) +
            " iterations; non-positive-residual counts of last two patterns: " +
            std::to_string(w_prev.size() ? low_count(w_prev) : -1) + ", " +
            std::to_string(low_count(w_cur)));
    }

    FittedExpectile fit;
    fit.tau = tau;
    fit.coefficients = gamma;
    fit.residuals_final = y - x * gamma;
    fit.weights_final = weights_for(gamma);
    fit.iterations = iter;
    fit.converged = true;
    fit.n_obs = n;
    fit.column_names = design.column_names;
    fit.covariance = sandwich_covariance(fit, design);
    return fit;
}

/// Per-coefficient (lo, hi) at significance level q: estimate +- z_{q/2} SE.
inline std::vector<std::pair<double, double>> confidence_interval(const FittedExpectile& fit,
                                                                  double q) {
    if (!(q > 0.0 && q < 1.0))
        throw ValidationError("confidence_interval: level must lie in (0,1)");
    const double z = normal_quantile(1.0 - q / 2.0);
    const Eigen::VectorXd se = fit.standard_errors();
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(fit.coefficients.size()));
    for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j)
        out.emplace_back(fit.coefficients(j) - z * se(j), fit.coefficients(j) + z * se(j));
    return out;
}

/// Independent fits over a strictly increasing tau grid, output ordered by tau.
inline std::vector<FittedExpectile> expectile_curve(const DesignMatrix& design,
                                                    const Eigen::VectorXd& y,
                                                    const std::vector<double>& tau_grid,
                                                    const ExpectileOptions& opt = {}) {
    if (tau_grid.empty()) throw ValidationError("expectile_curve: empty tau grid");
    for (std::size_t i = 0; i < tau_grid.size(); ++i) {
        if (!(tau_grid[i] > 0.0 && tau_grid[i] < 1.0))
            throw ValidationError("expectile_curve: grid level outside (0,1)");
        if (i > 0 && !(tau_grid[i] > tau_grid[i - 1]))
            throw ValidationError("expectile_curve: grid not strictly increasing");
    }
    std::vector<FittedExpectile> fits;
    fits.reserve(tau_grid.size());
    for (double tau : tau_grid) {
        try {
            fits.push_back(fit_expectile(design, y, tau, opt));
        } catch (const Error& e) {
            throw ConvergenceError("expectile_curve: at tau=" + std::to_string(tau) + ": " +
                                   e.what());
        }
    }
    return fits;
}

/// Number of observed design rows whose fitted values decrease between
/// adjacent grid levels by more than 1e-8. Expectile curves of a fixed
/// linear model can cross off-sample; this counts crossings at the data.
inline long count_expectile_crossings(const std::vector<FittedExpectile>& fits,
                                      const DesignMatrix& design) {
    long violations = 0;
    for (std::size_t a = 0; a + 1 < fits.size(); ++a) {
        const Eigen::VectorXd lo = design.values * fits[a].coefficients;
        const Eigen::VectorXd hi = design.values * fits[a + 1].coefficients;
        for (Eigen::Index i = 0; i < lo.size(); ++i)
            if (lo(i) > hi(i) + 1e-8) ++violations;
    }
    return violations;
}

/// Sample expectile: the unique root of
/// g(m) = tau * sum (v-m)+ - (1-tau) * sum (m-v)+, found by bisection over
/// [min v, max v].
inline double sample_expectile(std::span<const double> values, double tau) {
    if (values.empty()) throw ValidationError("sample_expectile: empty sample");
    if (!(tau > 0.0 && tau < 1.0))
        throw ValidationError("sample_expectile: tau must lie in (0,1)");

    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo == hi) return lo;

    auto g = [&](double m) {
        double pos = 0.0, neg = 0.0;
        for (double v : values) {
            if (v > m) pos += v - m;
            else neg += m - v;
        }
        return tau * pos - (1.0 - tau) * neg;
    };

    const double tol = 1e-10 * (1.0 + std::fabs(hi - lo));
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) lo = mid;
        else hi = mid;
    }

    // finish with the fixed point of the bracketed partition: the expectile
    // is the weighted mean with weights tau above and 1-tau at or below it
    double m = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
        double num = 0.0, den = 0.0;
        for (double v : values) {
            const double w = v > m ? tau : 1.0 - tau;
            num += w * v;
            den += w;
        }
        const double next = num / den;
        if (next == m) break;
        m = next;
    }
    return m;
}

} // namespace ratekit
