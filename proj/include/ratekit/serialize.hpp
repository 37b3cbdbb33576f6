#pragma once

#include <json.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "ratekit/allocation.hpp"
#include "ratekit/evaluation.hpp"
#include "ratekit/expectile.hpp"
#include "ratekit/glm.hpp"
#include "ratekit/principles.hpp"
#include "ratekit/quantile.hpp"
#include "ratekit/simulator.hpp"

namespace ratekit {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline ordered_json matrix_row_major(const Eigen::MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) rows.push_back(m(i, j));
    return rows;
}

inline Eigen::MatrixXd matrix_from_row_major(const ordered_json& j, Eigen::Index rows,
                                             Eigen::Index cols) {
    if (static_cast<Eigen::Index>(j.size()) != rows * cols)
        throw ParseError("matrix payload has wrong size");
    Eigen::MatrixXd m(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[static_cast<std::size_t>(k++)];
    return m;
}

inline ordered_json vector_json(const Eigen::VectorXd& v) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Eigen::VectorXd vector_from_json(const ordered_json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i];
    return v;
}

/// Fixed-precision float for CSV cells.
inline std::string fmt(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

/// Shortest faithful float for CSV cells carrying full precision.
inline std::string fmt_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline ordered_json glm_to_json(const FittedGlm& fit) {
    ordered_json j;
    j["family"] = family_name(fit.family);
    j["columns"] = fit.column_names;
    j["coefficients"] = detail::vector_json(fit.coefficients);
    j["covariance"] = detail::matrix_row_major(fit.covariance);
    j["dispersion"] = fit.dispersion;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    return j;
}

inline FittedGlm glm_from_json(const ordered_json& j) {
    FittedGlm fit;
    const std::string fam = j.at("family");
    if (fam == "logistic_exposure") fit.family = GlmFamily::logistic_exposure;
    else if (fam == "gamma_log") fit.family = GlmFamily::gamma_log;
    else throw ParseError("unknown GLM family '" + fam + "'");
    fit.column_names = j.at("columns").get<std::vector<std::string>>();
    fit.coefficients = detail::vector_from_json(j.at("coefficients"));
    const Eigen::Index k = fit.coefficients.size();
    fit.covariance = detail::matrix_from_row_major(j.at("covariance"), k, k);
    fit.dispersion = j.at("dispersion");
    fit.iterations = j.at("iterations");
    fit.converged = j.at("converged");
    return fit;
}

inline ordered_json expectile_to_json(const FittedExpectile& fit) {
    ordered_json j;
    j["family"] = "expectile";
    j["tau"] = fit.tau;
    j["columns"] = fit.column_names;
    j["coefficients"] = detail::vector_json(fit.coefficients);
    // sandwich covariance of sqrt(N)(estimate - truth); divide by n_obs for
    // the finite-sample covariance of the estimate
    j["sandwich"] = detail::matrix_row_major(fit.covariance);
    j["n_obs"] = fit.n_obs;
    j["standard_errors"] = detail::vector_json(fit.standard_errors());
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    return j;
}

inline FittedExpectile expectile_from_json(const ordered_json& j) {
    FittedExpectile fit;
    fit.tau = j.at("tau");
    fit.column_names = j.at("columns").get<std::vector<std::string>>();
    fit.coefficients = detail::vector_from_json(j.at("coefficients"));
    const Eigen::Index k = fit.coefficients.size();
    fit.covariance = detail::matrix_from_row_major(j.at("sandwich"), k, k);
    fit.n_obs = j.at("n_obs").get<long>();
    fit.iterations = j.at("iterations");
    fit.converged = j.at("converged");
    return fit;
}

inline ordered_json quantile_to_json(const FittedQuantile& fit) {
    ordered_json j;
    j["family"] = "quantile";
    j["tau"] = fit.tau;
    j["columns"] = fit.column_names;
    j["coefficients"] = detail::vector_json(fit.coefficients);
    j["objective"] = fit.objective;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["restart_spread"] = fit.restart_spread;
    return j;
}

inline FittedQuantile quantile_from_json(const ordered_json& j) {
    FittedQuantile fit;
    fit.tau = j.at("tau");
    fit.column_names = j.at("columns").get<std::vector<std::string>>();
    fit.coefficients = detail::vector_from_json(j.at("coefficients"));
    fit.objective = j.at("objective");
    fit.iterations = j.at("iterations");
    fit.converged = j.at("converged");
    if (j.contains("restart_spread")) fit.restart_spread = j.at("restart_spread");
    return fit;
}

inline ordered_json pqr_to_json(const FittedPqr& fit) {
    ordered_json j;
    j["family"] = "pqr";
    j["basis_degree"] = fit.basis_degree;
    j["legendre_basis"] = fit.legendre_basis;
    j["tau_grid"] = fit.tau_grid;
    j["columns"] = fit.column_names;
    j["theta"] = detail::matrix_row_major(fit.theta);
    j["objective"] = fit.objective;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["monotonicity_violations"] = fit.monotonicity_violations;
    return j;
}

inline FittedPqr pqr_from_json(const ordered_json& j) {
    FittedPqr fit;
    fit.basis_degree = j.at("basis_degree");
    fit.legendre_basis = j.at("legendre_basis");
    fit.tau_grid = j.at("tau_grid").get<std::vector<double>>();
    fit.column_names = j.at("columns").get<std::vector<std::string>>();
    fit.theta = detail::matrix_from_row_major(
        j.at("theta"), fit.basis_degree + 1,
        static_cast<Eigen::Index>(fit.column_names.size()));
    fit.objective = j.at("objective");
    fit.iterations = j.at("iterations");
    fit.converged = j.at("converged");
    fit.monotonicity_violations = j.at("monotonicity_violations").get<long>();
    return fit;
}

inline ordered_json allocation_to_json(const AllocationResult& res) {
    ordered_json j;
    j["principle"] = principle_name(res.principle);
    j["parameter"] = res.parameter;
    j["target"] = res.target_total;
    j["achieved"] = res.achieved_total;
    j["residual"] = res.residual;
    j["iterations"] = res.iterations;
    if (res.negative_parameter) j["negative_parameter"] = true;
    if (res.monotonicity_violations > 0)
        j["monotonicity_violations"] = res.monotonicity_violations;
    return j;
}

/// Curve export: the data behind the coefficient-path figure.
inline std::string expectile_curve_csv(const std::vector<FittedExpectile>& fits,
                                       double ci_level_q = 0.05) {
    std::string out = "tau,coefficient_name,estimate,se,ci_lo,ci_hi\n";
    for (const auto& fit : fits) {
        const Eigen::VectorXd se = fit.standard_errors();
        const auto ci = confidence_interval(fit, ci_level_q);
        for (Eigen::Index jcol = 0; jcol < fit.coefficients.size(); ++jcol) {
            out += detail::fmt_full(fit.tau);
            out += ',';
            out += fit.column_names[static_cast<std::size_t>(jcol)];
            out += ',';
            out += detail::fmt_full(fit.coefficients(jcol));
            out += ',';
            out += detail::fmt_full(se(jcol));
            out += ',';
            out += detail::fmt_full(ci[static_cast<std::size_t>(jcol)].first);
            out += ',';
            out += detail::fmt_full(ci[static_cast<std::size_t>(jcol)].second);
            out += '\n';
        }
    }
    return out;
}

inline std::string simulation_summary_csv(const std::vector<SimulationReport>& reports) {
    std::string out = "phi_true,model,mean_mse,var_of_mean_mse\n";
    for (const auto& rep : reports) {
        for (std::size_t j = 0; j < rep.model_names.size(); ++j) {
            out += detail::fmt_full(rep.loading_true);
            out += ',';
            out += rep.model_names[j];
            out += ',';
            out += detail::fmt_full(rep.mean_mse[j]);
            out += ',';
            out += detail::fmt_full(rep.var_mean_mse[j]);
            out += '\n';
        }
    }
    return out;
}

inline std::string simulation_class_csv(const std::vector<SimulationReport>& reports) {
    std::string out = "phi_true,model,class,bias,mse,var\n";
    for (const auto& rep : reports) {
        for (std::size_t j = 0; j < rep.model_names.size(); ++j) {
            for (std::size_t s = 0; s < rep.class_labels.size(); ++s) {
                out += detail::fmt_full(rep.loading_true);
                out += ',';
                out += rep.model_names[j];
                out += ',';
                out += rep.class_labels[s];
                out += ',';
                out += detail::fmt_full(rep.bias[j][s]);
                out += ',';
                out += detail::fmt_full(rep.mse[j][s]);
                out += ',';
                out += detail::fmt_full(rep.variance[j][s]);
                out += '\n';
            }
        }
    }
    return out;
}

/// Matrix CSV with "mean (se)" cells, percentages to two decimals.
inline std::string gini_matrix_csv(const GiniMatrix& gm) {
    std::string out = "base_premium";
    for (const auto& name : gm.model_names) out += "," + name;
    out += ",row_max\n";
    for (std::size_t b = 0; b < gm.model_names.size(); ++b) {
        out += gm.model_names[b];
        for (std::size_t c = 0; c < gm.model_names.size(); ++c)
            out += "," + detail::fmt(gm.mean[b][c], 2) + " (" + detail::fmt(gm.se[b][c], 2) +
                   ")";
        out += "," + detail::fmt(gm.row_max[b], 2) + "\n";
    }
    out += "mini_max_winner," + gm.model_names[gm.winner] + (gm.tie ? " (tie)" : "") + "\n";
    return out;
}

inline std::string lorenz_curve_csv(const std::string& base, const std::string& competing,
                                    const LorenzCurve& curve) {
    std::string out = "base,competing,premium_share,loss_share\n";
    for (std::size_t i = 0; i < curve.premium_share.size(); ++i) {
        out += base;
        out += ',';
        out += competing;
        out += ',';
        out += detail::fmt_full(curve.premium_share[i]);
        out += ',';
        out += detail::fmt_full(curve.loss_share[i]);
        out += '\n';
    }
    return out;
}

inline ordered_json coherence_to_json(const CoherenceReport& rep) {
    ordered_json j;
    j["tau"] = rep.tau;
    j["trials"] = rep.trials;
    ordered_json axioms = ordered_json::array();
    for (const auto& ax : rep.axioms) {
        ordered_json a;
        a["axiom"] = ax.name;
        a["checks"] = ax.checks;
        a["violations"] = ax.violations;
        a["worst_gap"] = ax.worst_gap;
        axioms.push_back(a);
    }
    j["axioms"] = axioms;
    j["downside_upside_identity_gap"] = rep.identity_gap;
    j["passed"] = rep.passed;
    return j;
}

} // namespace ratekit
