#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "ratekit/data_model.hpp"
#include "ratekit/errors.hpp"
#include "ratekit/linalg.hpp"

namespace ratekit {

enum class GlmFamily { logistic_exposure, gamma_log };

inline const char* family_name(GlmFamily f) {
    return f == GlmFamily::logistic_exposure ? "logistic_exposure" : "gamma_log";
}

struct GlmOptions {
    double tol = 1e-10;
    int max_iter_logistic = 50;
    int max_iter_gamma = 100;
    double prob_clamp = 1e-10;
};

struct FittedGlm {
    GlmFamily family = GlmFamily::logistic_exposure;
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd covariance;
    double dispersion = 1.0;  // Gamma only; 1 for the logistic part
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> column_names;
};

namespace detail {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline void check_layout(const FittedGlm& fit, Eigen::Index row_size, const char* context) {
    if (fit.coefficients.size() != row_size)
        throw LayoutError(std::string(context) + ": design row has " +
                          std::to_string(row_size) + " columns, fit expects " +
                          std::to_string(fit.coefficients.size()));
}

} // namespace detail

/// Exposure-corrected logistic regression: the claim probability is
/// 1 - p_i = w_i * sigmoid(x'alpha), maximised by Newton steps on the
/// Bernoulli likelihood with step halving. Covariance is the inverse
/// observed information at the optimum.
inline FittedGlm fit_logistic_exposure(const DesignMatrix& design,
                                       const std::vector<int>& claim_indicator,
                                       const std::vector<double>& exposure,
                                       const GlmOptions& opt = {}) {
    const Eigen::Index n = design.values.rows();
    const Eigen::Index k = design.values.cols();
    if (static_cast<Eigen::Index>(claim_indicator.size()) != n ||
        static_cast<Eigen::Index>(exposure.size()) != n)
        throw LayoutError("fit_logistic_exposure: responses do not match design rows");

    long claims = 0;
    for (int r : claim_indicator) claims += (r != 0);
    if (claims == 0 || claims == n)
        throw ValidationError("fit_logistic_exposure: need at least one claim and one non-claim");
    for (double w : exposure)
        if (!(w > 0.0 && w <= 1.0))
            throw ValidationError("fit_logistic_exposure: exposure outside (0,1]");

    const double lo = opt.prob_clamp, hi = 1.0 - opt.prob_clamp;
    auto loglik = [&](const Eigen::VectorXd& alpha) {
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double s = detail::sigmoid(design.values.row(i).dot(alpha));
            double q = exposure[static_cast<std::size_t>(i)] * s;
            q = std::min(std::max(q, lo), hi);
            ll += claim_indicator[static_cast<std::size_t>(i)] ? std::log(q) : std::log(1.0 - q);
        }
        return ll;
    };

    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(k);
    double ll = loglik(alpha);
    std::vector<double> step_trace;
    bool converged = false;
    int iter = 0;
    Eigen::MatrixXd info(k, k);

    while (iter < opt.max_iter_logistic) {
        ++iter;
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
        info.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double w = exposure[static_cast<std::size_t>(i)];
            const int r = claim_indicator[static_cast<std::size_t>(i)];
            const double s = detail::sigmoid(design.values.row(i).dot(alpha));
            const double sp = s * (1.0 - s);
            const double one_minus_q = std::max(1.0 - w * s, opt.prob_clamp);
            double g, h;
            if (r) {
                g = 1.0 - s;
                h = sp;
            } else {
                g = -w * sp / one_minus_q;
                h = w * sp * ((1.0 - 2.0 * s) * one_minus_q + w * sp) /
                    (one_minus_q * one_minus_q);
            }
            grad.noalias() += g * design.values.row(i).transpose();
            info.noalias() += h * design.values.row(i).transpose() * design.values.row(i);
        }
        Eigen::VectorXd step;
        try {
            step = solve_spd(info, grad, design.column_names, "fit_logistic_exposure");
        } catch (const RankError&) {
            // a design-rank problem surfaces on the first iteration; an
            // information matrix that degenerates later means the fitted
            // probabilities saturated, the separation signature
            if (iter > 1 && alpha.cwiseAbs().maxCoeff() > 5.0) {
                std::string trace;
                const std::size_t from = step_trace.size() > 5 ? step_trace.size() - 5 : 0;
                for (std::size_t i = from; i < step_trace.size(); ++i)
                    trace += (trace.empty() ? "" : ", ") + std::to_string(step_trace[i]);
                throw ConvergenceError(
                    "fit_logistic_exposure: diverging coefficients (possible perfect "
                    "separation) after " + std::to_string(iter) + " iterations; last step "
                    "sizes: " + trace);
            }
            throw;
        }

        // step halving keeps the likelihood non-decreasing
        double scale = 1.0;
        Eigen::VectorXd next = alpha + step;
        double ll_next = loglik(next);
        int halvings = 0;
        while (ll_next < ll && halvings < 30) {
            scale *= 0.5;
            next = alpha + scale * step;
            ll_next = loglik(next);
            ++halvings;
        }
        const double max_delta = (next - alpha).cwiseAbs().maxCoeff();
        step_trace.push_back(max_delta);
        alpha = next;
        ll = ll_next;
        if (max_delta < opt.tol) { converged = true; break; }
    }

    if (!converged) {
        std::string trace;
        const std::size_t from = step_trace.size() > 5 ? step_trace.size() - 5 : 0;
        for (std::size_t i = from; i < step_trace.size(); ++i)
            trace += (trace.empty() ? "" : ", ") + std::to_string(step_trace[i]);
        throw ConvergenceError(
            "fit_logistic_exposure: no convergence in " + std::to_string(iter) +
            " iterations (possible perfect separation); last step sizes: " + trace);
    }

    FittedGlm fit;
    fit.family = GlmFamily::logistic_exposure;
    fit.coefficients = alpha;
    fit.covariance = invert_spd(info, design.column_names, "fit_logistic_exposure");
    fit.dispersion = 1.0;
    fit.iterations = iter;
    fit.converged = true;
    fit.column_names = design.column_names;
    return fit;
}

/// Gamma regression with log link on strictly positive responses, fitted by
/// IRLS (unit working weights under the log link). Dispersion is the Pearson
/// statistic over n - k - 1 degrees of freedom.
inline FittedGlm fit_gamma_log(const DesignMatrix& design, const Eigen::VectorXd& response,
                               const GlmOptions& opt = {}) {
    const Eigen::Index n = design.values.rows();
    const Eigen::Index p = design.values.cols();
    if (response.size() != n)
        throw LayoutError("fit_gamma_log: response length does not match design rows");
    if (n < p)
        throw ValidationError("fit_gamma_log: fewer observations than design columns");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(response(i) > 0.0))
            throw DomainError("fit_gamma_log: non-positive response at row " +
                              std::to_string(i + 1));

    const Eigen::MatrixXd xtx = design.values.transpose() * design.values;
    Eigen::VectorXd eta = response.array().log().matrix();
    Eigen::VectorXd beta =
        solve_spd(xtx, design.values.transpose() * eta, design.column_names, "fit_gamma_log");

    bool converged = false;
    int iter = 0;
    while (iter < opt.max_iter_gamma) {
        ++iter;
        eta = design.values * beta;
        const Eigen::ArrayXd mu = eta.array().exp();
        const Eigen::VectorXd z = (eta.array() + (response.array() - mu) / mu).matrix();
        Eigen::VectorXd next =
            solve_spd(xtx, design.values.transpose() * z, design.column_names, "fit_gamma_log");
        const double max_delta = (next - beta).cwiseAbs().maxCoeff();
        beta = next;
        if (max_delta < opt.tol) { converged = true; break; }
    }
    if (!converged)
        throw ConvergenceError("fit_gamma_log: no convergence in " +
                               std::to_string(opt.max_iter_gamma) + " iterations");

    const Eigen::ArrayXd mu = (design.values * beta).array().exp();
    const double pearson = ((response.array() - mu) / mu).square().sum();
    const double dof = static_cast<double>(n - p);
    const double dispersion = pearson / std::max(dof, 1.0);

    FittedGlm fit;
    fit.family = GlmFamily::gamma_log;
    fit.coefficients = beta;
    fit.covariance = dispersion * invert_spd(xtx, design.column_names, "fit_gamma_log");
    fit.dispersion = dispersion;
    fit.iterations = iter;
    fit.converged = true;
    fit.column_names = design.column_names;
    return fit;
}

/// p_i = 1 - w * sigmoid(x'alpha), clamped into [1e-10, 1-1e-10].
inline double predict_no_claim_prob(const FittedGlm& logit_fit, const Eigen::RowVectorXd& row,
                                    double exposure, const GlmOptions& opt = {}) {
    detail::check_layout(logit_fit, row.size(), "predict_no_claim_prob");
    if (!(exposure > 0.0 && exposure <= 1.0))
        throw ValidationError("predict_no_claim_prob: exposure outside (0,1]");
    const double p = 1.0 - exposure * detail::sigmoid(row.dot(logit_fit.coefficients));
    return std::min(std::max(p, opt.prob_clamp), 1.0 - opt.prob_clamp);
}

/// Two-part pure premium (1 - p) * exp(x'beta).
inline double pure_premium(const FittedGlm& logit_fit, const FittedGlm& gamma_fit,
                           const Eigen::RowVectorXd& row, double exposure,
                           const GlmOptions& opt = {}) {
    detail::check_layout(logit_fit, row.size(), "pure_premium");
    detail::check_layout(gamma_fit, row.size(), "pure_premium");
    if (logit_fit.column_names != gamma_fit.column_names)
        throw LayoutError("pure_premium: logistic and gamma fits use different design layouts");
    const double p = predict_no_claim_prob(logit_fit, row, exposure, opt);
    return (1.0 - p) * std::exp(row.dot(gamma_fit.coefficients));
}

/// Variance of R * Y' with R ~ Bernoulli(1-p) independent of the Gamma
/// severity Y': (1-p) phi mu^2 + p (1-p) mu^2.
inline double two_part_variance(const FittedGlm& logit_fit, const FittedGlm& gamma_fit,
                                const Eigen::RowVectorXd& row, double exposure,
                                const GlmOptions& opt = {}) {
    detail::check_layout(logit_fit, row.size(), "two_part_variance");
    detail::check_layout(gamma_fit, row.size(), "two_part_variance");
    if (logit_fit.column_names != gamma_fit.column_names)
        throw LayoutError("two_part_variance: fits use different design layouts");
    const double p = predict_no_claim_prob(logit_fit, row, exposure, opt);
    const double mu = std::exp(row.dot(gamma_fit.coefficients));
    return (1.0 - p) * gamma_fit.dispersion * mu * mu + p * (1.0 - p) * mu * mu;
}

} // namespace ratekit
