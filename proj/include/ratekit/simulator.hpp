#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "ratekit/allocation.hpp"
#include "ratekit/data_model.hpp"
#include "ratekit/errors.hpp"
#include "ratekit/expectile.hpp"
#include "ratekit/glm.hpp"
#include "ratekit/quantile.hpp"
#include "ratekit/rng.hpp"

namespace ratekit {

enum class SimModel { QR, PQR, QRII, ER };

inline const char* sim_model_name(SimModel m) {
    switch (m) {
        case SimModel::QR: return "QR";
        case SimModel::PQR: return "PQR";
        case SimModel::QRII: return "QRII";
        case SimModel::ER: return "ER";
    }
    return "?";
}

struct SimulationConfig {
    int n_policies = 5000;
    int replicates = 200;  // the study design uses 5000; desk scale by default
    std::vector<double> bernoulli_probs = {0.5, 0.6, 0.8};
    std::vector<double> coefficients = {5.0, 0.5, 0.5, 0.5};
    double tweedie_power = 1.65;
    double tweedie_dispersion = 120.0;
    double loading_true = 0.10;
    double tau = 0.95;
    std::uint64_t master_seed = 1;
    std::vector<SimModel> models = {SimModel::QR, SimModel::PQR, SimModel::QRII, SimModel::ER};
    int threads = 1;
    double max_failure_fraction = 0.01;
    int pqr_degree = 2;
    std::vector<double> pqr_grid;  // empty: 0.05..0.95 step 0.05
    QuantileOptions quantile;
    ExpectileOptions expectile;
    GlmOptions glm;

    void validate() const {
        if (n_policies < 1 || replicates < 1)
            throw ValidationError("simulation config: N and T must be at least 1");
        if (!(tweedie_power > 1.0 && tweedie_power < 2.0))
            throw ValidationError("simulation config: power must lie in (1,2)");
        if (!(tweedie_dispersion > 0.0))
            throw ValidationError("simulation config: dispersion must be positive");
        if (coefficients.size() != bernoulli_probs.size() + 1)
            throw ValidationError("simulation config: need one coefficient per covariate "
                                  "plus intercept");
        for (double p : bernoulli_probs)
            if (!(p > 0.0 && p < 1.0))
                throw ValidationError("simulation config: covariate probability outside (0,1)");
        if (!(loading_true >= 0.0))
            throw ValidationError("simulation config: negative true loading");
        if (models.empty()) throw ValidationError("simulation config: no models selected");
    }

    std::vector<double> effective_pqr_grid() const {
        if (!pqr_grid.empty()) return pqr_grid;
        std::vector<double> grid;
        for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
        return grid;
    }
};

/// Compound Poisson-Gamma draw matching the Tweedie(mu, p, phi) law:
/// count ~ Poisson(mu^(2-p) / (phi (2-p))), severities Gamma with shape
/// (2-p)/(p-1) and scale phi (p-1) mu^(p-1).
inline double sample_tweedie(double mu, double p, double phi, RngStream& rng) {
    if (!(mu > 0.0)) throw DomainError("sample_tweedie: mean must be positive");
    if (!(p > 1.0 && p < 2.0)) throw DomainError("sample_tweedie: power outside (1,2)");
    if (!(phi > 0.0)) throw DomainError("sample_tweedie: dispersion must be positive");

    const double lambda = std::pow(mu, 2.0 - p) / (phi * (2.0 - p));
    const double shape = (2.0 - p) / (p - 1.0);
    const double scale = phi * (p - 1.0) * std::pow(mu, p - 1.0);
    const long count = rng.next_poisson(lambda);
    double loss = 0.0;
    for (long c = 0; c < count; ++c) loss += rng.next_gamma(shape, scale);
    return loss;
}

struct PortfolioDraw {
    DesignMatrix design;  // exposure-one rows
    Eigen::VectorXd losses;
    std::vector<int> claim_indicator;
    std::vector<std::size_t> class_index;  // tariff class of each policy
    std::vector<TariffClass> classes;
    Eigen::VectorXd mu_true;
    std::vector<double> true_premium_policy;
    std::vector<double> true_premium_class;
    double total_premium = 0.0;  // C
};

namespace detail {

constexpr std::uint64_t kPurposeCovariates = 1;
constexpr std::uint64_t kPurposeLosses = 2;

inline FactorSpec binary_factor_spec(std::size_t count) {
    FactorSpec spec;
    for (std::size_t j = 0; j < count; ++j)
        spec.factors.push_back({"x" + std::to_string(j + 1), {"0", "1"}, "0"});
    return spec;
}

} // namespace detail

/// One simulated data set: Bernoulli covariates, Tweedie losses with mean
/// exp(x'beta), and the true risk premiums (1 + phi) mu at policy and class
/// level. Streams are keyed by (seed, replicate, policy, purpose), so any
/// evaluation order reproduces the same portfolio.
inline PortfolioDraw generate_portfolio(const SimulationConfig& config, int replicate_index) {
    config.validate();
    const std::size_t n = static_cast<std::size_t>(config.n_policies);
    const std::size_t k = config.bernoulli_probs.size();
    const auto rep = static_cast<std::uint64_t>(replicate_index);

    PortfolioDraw draw;
    const FactorSpec spec = detail::binary_factor_spec(k);
    draw.classes = enumerate_tariff_classes(spec);

    draw.design.spec = spec;
    draw.design.column_names.push_back("(Intercept)");
    for (std::size_t j = 0; j < k; ++j)
        draw.design.column_names.push_back("x" + std::to_string(j + 1) + "_1");
    draw.design.values.resize(static_cast<Eigen::Index>(n),
                              static_cast<Eigen::Index>(k + 1));
    draw.losses.resize(static_cast<Eigen::Index>(n));
    draw.mu_true.resize(static_cast<Eigen::Index>(n));
    draw.claim_indicator.resize(n);
    draw.class_index.resize(n);
    draw.true_premium_policy.resize(n);

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        RngStream cov = RngStream::keyed(config.master_seed, rep, i, detail::kPurposeCovariates);
        double eta = config.coefficients[0];
        std::size_t cls = 0;
        draw.design.values(static_cast<Eigen::Index>(i), 0) = 1.0;
        for (std::size_t j = 0; j < k; ++j) {
            const bool on = cov.next_bernoulli(config.bernoulli_probs[j]);
            draw.design.values(static_cast<Eigen::Index>(i),
                               static_cast<Eigen::Index>(j + 1)) = on ? 1.0 : 0.0;
            if (on) eta += config.coefficients[j + 1];
            cls = cls * 2 + (on ? 1 : 0);
        }
        const double mu = std::exp(eta);
        RngStream loss_rng =
            RngStream::keyed(config.master_seed, rep, i, detail::kPurposeLosses);
        const double loss =
            sample_tweedie(mu, config.tweedie_power, config.tweedie_dispersion, loss_rng);

        draw.mu_true(static_cast<Eigen::Index>(i)) = mu;
        draw.losses(static_cast<Eigen::Index>(i)) = loss;
        draw.claim_indicator[i] = loss > 0.0 ? 1 : 0;
        draw.class_index[i] = cls;
        draw.true_premium_policy[i] = (1.0 + config.loading_true) * mu;
        total += draw.true_premium_policy[i];
    }
    draw.total_premium = total;

    draw.true_premium_class.reserve(draw.classes.size());
    Eigen::VectorXd beta(static_cast<Eigen::Index>(k + 1));
    for (std::size_t j = 0; j <= k; ++j)
        beta(static_cast<Eigen::Index>(j)) = config.coefficients[j];
    for (const auto& tc : draw.classes)
        draw.true_premium_class.push_back((1.0 + config.loading_true) *
                                          std::exp(tc.design_row.dot(beta)));
    return draw;
}

struct SimulationReport {
    std::vector<std::string> model_names;
    std::vector<std::string> class_labels;
    std::vector<std::vector<double>> bias;      // [model][class]
    std::vector<std::vector<double>> mse;       // [model][class]
    std::vector<std::vector<double>> variance;  // mse - bias^2
    std::vector<double> mean_mse;               // [model]
    std::vector<double> var_mean_mse;           // [model]
    int replicates_requested = 0;
    int replicates_used = 0;
    int failures = 0;
    std::vector<std::string> failure_reasons;
    double loading_true = 0.0;
    std::uint64_t master_seed = 0;
};

namespace detail {

struct ReplicateOutcome {
    bool failed = false;
    std::string reason;
    // [model][class] predicted risk premium
    std::vector<std::vector<double>> predicted;
    std::vector<double> true_class;
};

inline ReplicateOutcome run_replicate(const SimulationConfig& config, int t) {
    ReplicateOutcome out;
    try {
        const PortfolioDraw draw = generate_portfolio(config, t);
        const std::size_t n = static_cast<std::size_t>(config.n_policies);
        const std::size_t num_classes = draw.classes.size();
        out.true_class = draw.true_premium_class;

        std::vector<std::size_t> claimants;
        for (std::size_t i = 0; i < n; ++i)
            if (draw.claim_indicator[i]) claimants.push_back(i);
        if (claimants.empty() || claimants.size() == n)
            throw ValidationError("replicate has no claims or only claims");

        const std::vector<double> unit_exposure(n, 1.0);
        const FittedGlm logit = fit_logistic_exposure(draw.design, draw.claim_indicator,
                                                      unit_exposure, config.glm);
        const DesignMatrix claim_design = subset_design(draw.design, claimants);
        Eigen::VectorXd claim_losses(static_cast<Eigen::Index>(claimants.size()));
        for (std::size_t c = 0; c < claimants.size(); ++c)
            claim_losses(static_cast<Eigen::Index>(c)) =
                draw.losses(static_cast<Eigen::Index>(claimants[c]));
        const FittedGlm gamma = fit_gamma_log(claim_design, claim_losses, config.glm);

        // per-policy and per-class no-claim probabilities and pure premiums
        std::vector<double> p_hat(n), pure(n);
        double pure_total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::RowVectorXd row = draw.design.values.row(static_cast<Eigen::Index>(i));
            p_hat[i] = predict_no_claim_prob(logit, row, 1.0, config.glm);
            pure[i] = (1.0 - p_hat[i]) * std::exp(row.dot(gamma.coefficients));
            pure_total += pure[i];
        }
        std::vector<double> p_class(num_classes), pure_class(num_classes);
        for (std::size_t s = 0; s < num_classes; ++s) {
            const auto& row = draw.classes[s].design_row;
            p_class[s] = predict_no_claim_prob(logit, row, 1.0, config.glm);
            pure_class[s] = (1.0 - p_class[s]) * std::exp(row.dot(gamma.coefficients));
        }

        const double C = draw.total_premium;
        const Eigen::VectorXd claim_log_losses = claim_losses.array().log().matrix();

        out.predicted.resize(config.models.size());
        std::map<long long, FittedQuantile> qrii_cache;

        for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
            std::vector<double>& z_hat = out.predicted[mi];
            z_hat.assign(num_classes, 0.0);

            switch (config.models[mi]) {
                case SimModel::ER: {
                    const FittedExpectile er =
                        fit_expectile(draw.design, draw.losses, config.tau, config.expectile);
                    std::vector<double> base(n);
                    for (std::size_t i = 0; i < n; ++i)
                        base[i] = draw.design.values.row(static_cast<Eigen::Index>(i))
                                      .dot(er.coefficients) - pure[i];
                    const AllocationResult alloc =
                        solve_loading_linear(Principle::EPP, pure, base, C);
                    for (std::size_t s = 0; s < num_classes; ++s) {
                        const double v = draw.classes[s].design_row.dot(er.coefficients);
                        z_hat[s] = pure_class[s] + alloc.parameter * (v - pure_class[s]);
                    }
                    break;
                }
                case SimModel::QR: {
                    const auto levels = class_quantile_levels(config.tau, p_class);
                    std::vector<double> q_class(num_classes);
                    for (std::size_t s = 0; s < num_classes; ++s) {
                        if (!levels[s].feasible)
                            throw FeasibilityError("QR: class " + draw.classes[s].label +
                                                   " infeasible at tau=" +
                                                   std::to_string(config.tau));
                        const FittedQuantile fq = fit_quantile(claim_design, claim_log_losses,
                                                               levels[s].tau_star,
                                                               config.quantile);
                        q_class[s] = predict_var(fq, draw.classes[s].design_row);
                    }
                    std::vector<double> base(n);
                    for (std::size_t i = 0; i < n; ++i)
                        base[i] = q_class[draw.class_index[i]] - pure[i];
                    const AllocationResult alloc =
                        solve_loading_linear(Principle::QPP, pure, base, C);
                    for (std::size_t s = 0; s < num_classes; ++s)
                        z_hat[s] = pure_class[s] +
                                   alloc.parameter * (q_class[s] - pure_class[s]);
                    break;
                }
                case SimModel::PQR: {
                    PqrOptions popt;
                    popt.inner = config.quantile;
                    const FittedPqr pqr = fit_pqr(claim_design, claim_log_losses,
                                                  config.pqr_degree,
                                                  config.effective_pqr_grid(), popt);
                    const auto levels = class_quantile_levels(config.tau, p_class);
                    std::vector<double> q_class(num_classes);
                    for (std::size_t s = 0; s < num_classes; ++s) {
                        if (!levels[s].feasible)
                            throw FeasibilityError("PQR: class " + draw.classes[s].label +
                                                   " infeasible at tau=" +
                                                   std::to_string(config.tau));
                        q_class[s] = predict_var(pqr, draw.classes[s].design_row,
                                                 levels[s].tau_star);
                    }
                    std::vector<double> base(n);
                    for (std::size_t i = 0; i < n; ++i)
                        base[i] = q_class[draw.class_index[i]] - pure[i];
                    const AllocationResult alloc =
                        solve_loading_linear(Principle::QPP, pure, base, C);
                    for (std::size_t s = 0; s < num_classes; ++s)
                        z_hat[s] = pure_class[s] +
                                   alloc.parameter * (q_class[s] - pure_class[s]);
                    break;
                }
                case SimModel::QRII: {
                    auto refit = [&](double tau) {
                        const long long key = std::llround(tau * 1e6);
                        auto it = qrii_cache.find(key);
                        if (it == qrii_cache.end())
                            it = qrii_cache.emplace(key, fit_quantile(claim_design,
                                                                      claim_log_losses, tau,
                                                                      config.quantile)).first;
                        std::vector<double> q(n);
                        for (std::size_t i = 0; i < n; ++i)
                            q[i] = predict_var(it->second,
                                               draw.design.values.row(
                                                   static_cast<Eigen::Index>(i)));
                        return q;
                    };
                    const AllocationResult alloc = solve_tau_tsqpp(p_hat, refit, C);
                    const FittedQuantile& fq =
                        qrii_cache.at(std::llround(alloc.parameter * 1e6));
                    for (std::size_t s = 0; s < num_classes; ++s)
                        z_hat[s] = (1.0 - p_class[s]) *
                                   predict_var(fq, draw.classes[s].design_row);
                    break;
                }
            }
        }
    } catch (const Error& e) {
        out.failed = true;
        out.reason = e.what();
    }
    return out;
}

} // namespace detail

/// Runs the full comparison protocol: per replicate fit the two-part GLM,
/// allocate each model's loading parameter against that replicate's total
/// premium, price all classes, and aggregate bias / MSE / sample variance.
/// Replicates are keyed work units: results are identical for any thread
/// count because outcomes are stored by replicate index and reduced in
/// order.
inline SimulationReport run_simulation(const SimulationConfig& config) {
    config.validate();
    const int T = config.replicates;
    std::vector<detail::ReplicateOutcome> outcomes(static_cast<std::size_t>(T));

    const int threads = std::max(1, config.threads);
    if (threads == 1) {
        for (int t = 0; t < T; ++t)
            outcomes[static_cast<std::size_t>(t)] = detail::run_replicate(config, t);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&, w]() {
                for (int t = w; t < T; t += threads)
                    outcomes[static_cast<std::size_t>(t)] = detail::run_replicate(config, t);
            });
        }
        for (auto& th : pool) th.join();
    }

    SimulationReport report;
    report.replicates_requested = T;
    report.loading_true = config.loading_true;
    report.master_seed = config.master_seed;
    for (SimModel m : config.models) report.model_names.push_back(sim_model_name(m));

    const FactorSpec spec = detail::binary_factor_spec(config.bernoulli_probs.size());
    for (const auto& tc : enumerate_tariff_classes(spec))
        report.class_labels.push_back(tc.label);
    const std::size_t S = report.class_labels.size();
    const std::size_t J = config.models.size();

    report.bias.assign(J, std::vector<double>(S, 0.0));
    report.mse.assign(J, std::vector<double>(S, 0.0));
    report.variance.assign(J, std::vector<double>(S, 0.0));
    report.mean_mse.assign(J, 0.0);
    report.var_mean_mse.assign(J, 0.0);

    std::vector<std::vector<double>> mse_per_replicate(J);
    for (int t = 0; t < T; ++t) {
        const auto& out = outcomes[static_cast<std::size_t>(t)];
        if (out.failed) {
            ++report.failures;
            report.failure_reasons.push_back("replicate " + std::to_string(t) + ": " +
                                             out.reason);
            continue;
        }
        ++report.replicates_used;
        for (std::size_t j = 0; j < J; ++j) {
            double sq_sum = 0.0;
            for (std::size_t s = 0; s < S; ++s) {
                const double err = out.true_class[s] - out.predicted[j][s];
                report.bias[j][s] += err;
                report.mse[j][s] += err * err;
                sq_sum += err * err;
            }
            mse_per_replicate[j].push_back(sq_sum / static_cast<double>(S));
        }
    }

    if (report.failures > config.max_failure_fraction * T)
        throw ConvergenceError("run_simulation: " + std::to_string(report.failures) + " of " +
                               std::to_string(T) + " replicates failed; first: " +
                               (report.failure_reasons.empty() ? "?"
                                                               : report.failure_reasons.front()));
    if (report.replicates_used == 0)
        throw ConvergenceError("run_simulation: no usable replicates");

    const double used = static_cast<double>(report.replicates_used);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t s = 0; s < S; ++s) {
            report.bias[j][s] /= used;
            report.mse[j][s] /= used;
            report.variance[j][s] = report.mse[j][s] - report.bias[j][s] * report.bias[j][s];
        }
        double mean = 0.0;
        for (double v : mse_per_replicate[j]) mean += v;
        mean /= used;
        report.mean_mse[j] = mean;
        double ss = 0.0;
        for (double v : mse_per_replicate[j]) ss += (v - mean) * (v - mean);
        report.var_mean_mse[j] = report.replicates_used > 1
                                     ? ss / (used * (used - 1.0))
                                     : 0.0;
    }
    return report;
}

} // namespace ratekit
