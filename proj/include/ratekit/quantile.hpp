#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ratekit/data_model.hpp"
#include "ratekit/errors.hpp"
#include "ratekit/linalg.hpp"
#include "ratekit/rng.hpp"

namespace ratekit {

struct QuantileOptions {
    double smoothing_eps = 1e-6;
    double tol = 1e-8;
    int max_iter = 500;
    int restarts = 5;
    std::uint64_t restart_seed = 0x51B7C4D2A6E09F31ULL;
};

struct FittedQuantile {
    double tau = 0.5;
    Eigen::VectorXd coefficients;  // log-scale when fitted on log losses
    double objective = 0.0;        // pinball loss at the solution
    int iterations = 0;
    bool converged = false;
    double restart_spread = 0.0;   // worst relative objective gap across restarts
    std::vector<std::string> column_names;
};

struct PqrOptions {
    QuantileOptions inner;
    bool legendre_basis = false;
};

struct FittedPqr {
    Eigen::MatrixXd theta;  // (degree+1) x (k+1); row m holds the order-m basis loadings
    int basis_degree = 2;
    bool legendre_basis = false;
    std::vector<double> tau_grid;
    double objective = 0.0;  // grid-summed pinball loss
    int iterations = 0;
    bool converged = false;
    long monotonicity_violations = 0;
    std::vector<std::string> column_names;
};

struct ClassQuantileLevel {
    double p_hat = 0.0;
    double tau_star = std::numeric_limits<double>::quiet_NaN();
    bool feasible = false;
};

/// tau* = (tau - p) / (1 - p) per class; classes with p >= tau are
/// infeasible (their unconditional tau-quantile sits in the zero mass).
inline std::vector<ClassQuantileLevel> class_quantile_levels(double tau,
                                                             std::span<const double> probs) {
    if (!(tau > 0.0 && tau < 1.0))
        throw ValidationError("class_quantile_levels: tau must lie in (0,1)");
    std::vector<ClassQuantileLevel> out;
    out.reserve(probs.size());
    for (double p : probs) {
        if (!(p >= 0.0 && p < 1.0))
            throw ValidationError("class_quantile_levels: probability outside [0,1)");
        ClassQuantileLevel lvl;
        lvl.p_hat = p;
        if (p < tau) {
            lvl.tau_star = (tau - p) / (1.0 - p);
            lvl.feasible = lvl.tau_star > 0.0 && lvl.tau_star < 1.0;
        }
        out.push_back(lvl);
    }
    return out;
}

/// Pinball loss rho_tau(u) = u (tau - 1{u<0}), summed.
inline double pinball_loss(const Eigen::VectorXd& residuals, double tau) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < residuals.size(); ++i) {
        const double u = residuals(i);
        total += u >= 0.0 ? tau * u : (tau - 1.0) * u;
    }
    return total;
}

namespace detail {

struct IrlsRun {
    Eigen::VectorXd gamma;
    double objective = 0.0;
    int iterations = 0;
};

/// Exact minimiser of the one-dimensional section
/// f(d) = sum_r rho_{tau_r}(u_r - d v_r), a convex piecewise-linear
/// function. Returns the leftmost minimiser, which pins flat optimal faces
/// to the order-statistic vertex.
inline double pinball_line_search(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                  const double* tau_scalar,
                                  const std::vector<double>* tau_rows) {
    const Eigen::Index n = u.size();
    double slope = 0.0;
    std::vector<std::pair<double, double>> events;  // (breakpoint, slope jump)
    events.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r) {
        const double vr = v(r);
        if (vr == 0.0) continue;
        const double tau = tau_scalar ? *tau_scalar
                                      : (*tau_rows)[static_cast<std::size_t>(r)];
        slope += vr > 0.0 ? -vr * tau : -vr * (tau - 1.0);
        events.emplace_back(u(r) / vr, std::fabs(vr));
    }
    if (events.empty() || slope >= 0.0) return 0.0;
    std::sort(events.begin(), events.end());
    for (const auto& [d, jump] : events) {
        slope += jump;
        if (slope >= 0.0) return d;
    }
    return events.back().first;
}

/// Smallest one-sided directional derivative along +-each coordinate.
inline double pinball_slack(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double tau,
                            const Eigen::VectorXd& gamma, double zero_tol) {
    const Eigen::VectorXd u = y - x * gamma;
    double worst = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (double sign : {1.0, -1.0}) {
            double d = 0.0;
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                const double t = sign * x(i, j);
                if (u(i) > zero_tol) d += -tau * t;
                else if (u(i) < -zero_tol) d += (1.0 - tau) * t;
                else d += (1.0 - tau) * std::max(t, 0.0) + tau * std::max(-t, 0.0);
            }
            worst = std::min(worst, d);
        }
    }
    return worst;
}

/// One-sided derivatives of the section f(d) = sum_r rho(u_r - d v_r) at d=0.
inline std::pair<double, double> section_derivatives(const Eigen::VectorXd& u,
                                                     const Eigen::VectorXd& v,
                                                     const double* tau_scalar,
                                                     const std::vector<double>* tau_rows,
                                                     double zero_tol) {
    double plus = 0.0, minus = 0.0;
    for (Eigen::Index r = 0; r < u.size(); ++r) {
        const double vr = v(r);
        if (vr == 0.0) continue;
        const double tau = tau_scalar ? *tau_scalar
                                      : (*tau_rows)[static_cast<std::size_t>(r)];
        if (u(r) > zero_tol) {
            plus += -tau * vr;
            minus += tau * vr;
        } else if (u(r) < -zero_tol) {
            plus += (1.0 - tau) * vr;
            minus += -(1.0 - tau) * vr;
        } else {
            plus += (1.0 - tau) * std::max(vr, 0.0) + tau * std::max(-vr, 0.0);
            minus += (1.0 - tau) * std::max(-vr, 0.0) + tau * std::max(vr, 0.0);
        }
    }
    return {plus, minus};
}

/// Cyclic exact coordinate descent on the pinball objective; finishes the
/// smoothed IRLS iterate on the true piecewise-linear surface. Multivariate
/// fits move a coordinate only when it strictly improves; the intercept-only
/// case also drifts across flat optimal faces to the leftmost vertex, the
/// order-statistic convention.
inline void coordinate_polish(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              double tau, Eigen::VectorXd& gamma, int max_passes = 25) {
    const bool pin_left = x.cols() == 1;
    const double zero_tol = 1e-9 * (1.0 + y.cwiseAbs().maxCoeff());
    Eigen::VectorXd u = y - x * gamma;
    for (int pass = 0; pass < max_passes; ++pass) {
        bool moved = false;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            if (!pin_left) {
                const auto [plus, minus] =
                    section_derivatives(u, x.col(j), &tau, nullptr, zero_tol);
                if (plus >= 0.0 && minus >= 0.0) continue;  // already section-minimal
            }
            const double step = pinball_line_search(u, x.col(j), &tau, nullptr);
            if (step != 0.0) {
                gamma(j) += step;
                u.noalias() -= step * x.col(j);
                moved = true;
            }
        }
        if (!moved) break;
    }
}

/// Smoothed IRLS for the pinball objective: weight tau/max(eps,|u|) on
/// positive residuals, (1-tau)/max(eps,|u|) otherwise.
/// Alternates the smoothed IRLS fixed point with the exact coordinate
/// finisher. IRLS escapes the corner points exact coordinate descent can
/// stick to, and the finisher removes the smoothing bias, so a few rounds
/// land every start on the same vertex of the convex objective.
inline IrlsRun quantile_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double tau,
                             Eigen::VectorXd gamma, const QuantileOptions& opt,
                             const std::vector<std::string>& names) {
    const Eigen::Index n = x.rows();
    IrlsRun run;
    Eigen::VectorXd w(n);
    Eigen::VectorXd best_gamma = gamma;
    double best_obj = std::numeric_limits<double>::infinity();

    auto irls_stage = [&](double eps) {
        int iters = 0;
        while (iters < opt.max_iter) {
            ++iters;
            const Eigen::VectorXd u = y - x * gamma;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double au = std::max(eps, std::fabs(u(i)));
                w(i) = (u(i) > 0.0 ? tau : 1.0 - tau) / au;
            }
            const Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
            const Eigen::VectorXd xtwy = x.transpose() * (w.asDiagonal() * y);
            const Eigen::VectorXd next = solve_spd(xtwx, xtwy, names, "fit_quantile");
            const double max_delta = (next - gamma).cwiseAbs().maxCoeff();
            gamma = next;
            if (max_delta < opt.tol) break;
        }
        run.iterations += iters;
    };

    for (int round = 0; round < 3; ++round) {
        // continuation: once converged at the base smoothing, tighten it so
        // the smoothed optimum collapses onto the vertex before the finisher
        irls_stage(opt.smoothing_eps);
        irls_stage(std::max(1e-12, opt.smoothing_eps * 1e-2));
        irls_stage(std::max(1e-12, opt.smoothing_eps * 1e-4));
        coordinate_polish(x, y, tau, gamma);
        const double obj = pinball_loss(y - x * gamma, tau);
        if (obj < best_obj - 1e-13 * (1.0 + std::fabs(obj))) {
            best_obj = obj;
            best_gamma = gamma;
        } else {
            break;
        }
    }
    run.gamma = best_gamma;
    run.objective = best_obj;
    return run;
}

} // namespace detail

/// Quantile regression by smoothed IRLS started from the least-squares
/// solution, cross-checked against deterministic pseudo-random restarts:
/// the problem is convex, so all runs must land on the same objective.
inline FittedQuantile fit_quantile(const DesignMatrix& design, const Eigen::VectorXd& y,
                                   double tau, const QuantileOptions& opt = {}) {
    if (!(tau > 0.0 && tau < 1.0))
        throw ValidationError("fit_quantile: tau must lie in (0,1)");
    const Eigen::Index n = design.values.rows();
    const Eigen::Index k = design.values.cols();
    if (y.size() != n) throw LayoutError("fit_quantile: response length mismatch");
    if (n < k) throw ValidationError("fit_quantile: fewer observations than columns");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!std::isfinite(y(i))) throw DomainError("fit_quantile: non-finite response");

    const Eigen::MatrixXd& x = design.values;
    const Eigen::VectorXd ols = solve_spd(x.transpose() * x, x.transpose() * y,
                                          design.column_names, "fit_quantile");

    const double mean_y = y.mean();
    const double sd_y = std::sqrt((y.array() - mean_y).square().sum() /
                                  std::max<double>(1.0, static_cast<double>(n - 1)));
    const double spread = sd_y > 0.0 ? sd_y : 1.0;

    std::vector<detail::IrlsRun> runs;
    runs.push_back(detail::quantile_irls(x, y, tau, ols, opt, design.column_names));
    for (int r = 1; r <= opt.restarts; ++r) {
        RngStream rng = RngStream::keyed(opt.restart_seed, static_cast<std::uint64_t>(r));
        Eigen::VectorXd start = ols;
        for (Eigen::Index j = 0; j < k; ++j) start(j) += 0.5 * spread * rng.next_normal();
        runs.push_back(detail::quantile_irls(x, y, tau, start, opt, design.column_names));
    }

    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].objective < runs[best].objective) best = r;

    const double best_obj = runs[best].objective;
    double obj_spread = 0.0;
    for (const auto& run : runs)
        obj_spread = std::max(obj_spread, (run.objective - best_obj) /
                                              std::max(1.0, std::fabs(best_obj)));
    if (detail::pinball_slack(x, y, tau, runs[best].gamma,
                              1e-9 * (1.0 + y.cwiseAbs().maxCoeff())) <
        -1e-4 * static_cast<double>(n)) {
        std::string trace;
        for (const auto& run : runs)
            trace += (trace.empty() ? "" : ", ") + std::to_string(run.objective);
        throw ConvergenceError("fit_quantile: optimality certificate failed at tau=" +
                               std::to_string(tau) + "; run objectives: " + trace);
    }

    FittedQuantile fit;
    fit.tau = tau;
    fit.coefficients = runs[best].gamma;
    fit.objective = best_obj;
    fit.iterations = runs[best].iterations;
    fit.converged = true;
    fit.restart_spread = obj_spread;
    fit.column_names = design.column_names;
    return fit;
}

/// Smallest one-sided directional derivative of the pinball objective along
/// +-each coordinate at gamma. Non-negative (up to tolerance) certifies
/// optimality of a convex piecewise-linear objective.
inline double pinball_directional_slack(const DesignMatrix& design, const Eigen::VectorXd& y,
                                        double tau, const Eigen::VectorXd& gamma) {
    return detail::pinball_slack(design.values, y, tau, gamma,
                                 1e-9 * (1.0 + y.cwiseAbs().maxCoeff()));
}

/// Basis values (b_0(tau), ..., b_degree(tau)): raw powers by default,
/// shifted Legendre polynomials on [0,1] when requested. The basis choice
/// affects conditioning only; the fitted quantile function is the same.
inline Eigen::VectorXd pqr_basis(int degree, bool legendre, double tau) {
    Eigen::VectorXd b(degree + 1);
    if (!legendre) {
        double t = 1.0;
        for (int m = 0; m <= degree; ++m) { b(m) = t; t *= tau; }
        return b;
    }
    const double z = 2.0 * tau - 1.0;
    b(0) = 1.0;
    if (degree >= 1) b(1) = z;
    for (int m = 1; m + 1 <= degree; ++m)
        b(m + 1) = ((2.0 * m + 1.0) * z * b(m) - m * b(m - 1)) / (m + 1.0);
    return b;
}

/// Coefficient functions evaluated at tau: gamma_j(tau) = sum_m theta(m,j) b_m(tau).
inline Eigen::VectorXd pqr_coefficients_at(const FittedPqr& fit, double tau) {
    const Eigen::VectorXd b = pqr_basis(fit.basis_degree, fit.legendre_basis, tau);
    return fit.theta.transpose() * b;
}

/// Grid-summed pinball loss of a PQR parameter matrix.
inline double pqr_objective(const FittedPqr& fit, const DesignMatrix& design,
                            const Eigen::VectorXd& y) {
    double total = 0.0;
    for (double tau : fit.tau_grid) {
        const Eigen::VectorXd gamma = pqr_coefficients_at(fit, tau);
        total += pinball_loss(y - design.values * gamma, tau);
    }
    return total;
}

/// Parametric quantile regression: polynomial coefficient functions of the
/// quantile level, fitted by smoothed IRLS on the basis-expanded design.
/// The normal equations decompose per grid level as kron(b b', X' W X),
/// which keeps the accumulation at original-design width.
inline FittedPqr fit_pqr(const DesignMatrix& design, const Eigen::VectorXd& y, int degree,
                         const std::vector<double>& tau_grid, const PqrOptions& opt = {}) {
    if (degree < 0) throw ValidationError("fit_pqr: degree must be non-negative");
    const std::size_t min_grid = degree >= 1 ? static_cast<std::size_t>(degree) + 2 : 1;
    if (tau_grid.size() < min_grid)
        throw ValidationError("fit_pqr: grid needs at least " + std::to_string(min_grid) +
                              " levels for degree " + std::to_string(degree));
    for (std::size_t g = 0; g < tau_grid.size(); ++g) {
        if (!(tau_grid[g] > 0.0 && tau_grid[g] < 1.0))
            throw ValidationError("fit_pqr: grid level outside (0,1)");
        if (g > 0 && !(tau_grid[g] > tau_grid[g - 1]))
            throw ValidationError("fit_pqr: grid not strictly increasing");
    }

    const Eigen::Index n = design.values.rows();
    const Eigen::Index k = design.values.cols();
    const Eigen::Index m = degree + 1;
    const Eigen::Index kk = m * k;
    if (y.size() != n) throw LayoutError("fit_pqr: response length mismatch");
    const Eigen::Index total_rows = n * static_cast<Eigen::Index>(tau_grid.size());
    if (total_rows < kk) throw ValidationError("fit_pqr: expanded design has too few rows");

    const std::size_t num_g = tau_grid.size();
    std::vector<Eigen::VectorXd> basis(num_g);
    for (std::size_t g = 0; g < num_g; ++g)
        basis[g] = pqr_basis(degree, opt.legendre_basis, tau_grid[g]);

    std::vector<std::string> expanded_names;
    expanded_names.reserve(static_cast<std::size_t>(kk));
    for (Eigen::Index mm = 0; mm < m; ++mm)
        for (Eigen::Index j = 0; j < k; ++j)
            expanded_names.push_back((opt.legendre_basis ? "P" : "tau^") +
                                     std::to_string(mm) + ":" + design.column_names[
                                         static_cast<std::size_t>(j)]);

    // initialise from independent per-level fits projected onto the basis
    QuantileOptions init_opt = opt.inner;
    init_opt.restarts = 0;
    Eigen::MatrixXd gamma_grid(num_g, k);
    for (std::size_t g = 0; g < num_g; ++g)
        gamma_grid.row(static_cast<Eigen::Index>(g)) =
            fit_quantile(design, y, tau_grid[g], init_opt).coefficients.transpose();

    Eigen::MatrixXd bmat(num_g, m);
    for (std::size_t g = 0; g < num_g; ++g)
        bmat.row(static_cast<Eigen::Index>(g)) = basis[g].transpose();
    std::vector<std::string> basis_names;
    for (Eigen::Index mm = 0; mm < m; ++mm) basis_names.push_back("b" + std::to_string(mm));
    Eigen::MatrixXd theta(m, k);
    {
        const Eigen::MatrixXd btb = bmat.transpose() * bmat;
        for (Eigen::Index j = 0; j < k; ++j)
            theta.col(j) = solve_spd(btb, bmat.transpose() * gamma_grid.col(j),
                                     basis_names, "fit_pqr basis projection");
    }

    auto vec_of = [&](const Eigen::MatrixXd& th) {
        Eigen::VectorXd v(kk);
        for (Eigen::Index mm = 0; mm < m; ++mm)
            for (Eigen::Index j = 0; j < k; ++j) v(mm * k + j) = th(mm, j);
        return v;
    };
    auto mat_of = [&](const Eigen::VectorXd& v) {
        Eigen::MatrixXd th(m, k);
        for (Eigen::Index mm = 0; mm < m; ++mm)
            for (Eigen::Index j = 0; j < k; ++j) th(mm, j) = v(mm * k + j);
        return th;
    };

    const Eigen::MatrixXd& x = design.values;
    Eigen::VectorXd vec = vec_of(theta);
    bool converged = false;
    int iter = 0;
    Eigen::VectorXd w(n);
    while (iter < opt.inner.max_iter) {
        ++iter;
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(kk, kk);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(kk);
        const Eigen::MatrixXd th = mat_of(vec);
        for (std::size_t g = 0; g < num_g; ++g) {
            const double tau = tau_grid[g];
            const Eigen::VectorXd gamma = th.transpose() * basis[g];
            const Eigen::VectorXd u = y - x * gamma;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double au = std::max(opt.inner.smoothing_eps, std::fabs(u(i)));
                w(i) = (u(i) > 0.0 ? tau : 1.0 - tau) / au;
            }
            const Eigen::MatrixXd a_g = x.transpose() * w.asDiagonal() * x;
            const Eigen::VectorXd c_g = x.transpose() * (w.asDiagonal() * y);
            for (Eigen::Index ma = 0; ma < m; ++ma) {
                rhs.segment(ma * k, k).noalias() += basis[g](ma) * c_g;
                for (Eigen::Index mb = 0; mb < m; ++mb)
                    h.block(ma * k, mb * k, k, k).noalias() +=
                        (basis[g](ma) * basis[g](mb)) * a_g;
            }
        }
        const Eigen::VectorXd next = solve_spd(h, rhs, expanded_names, "fit_pqr");
        const double max_delta = (next - vec).cwiseAbs().maxCoeff();
        vec = next;
        if (max_delta < opt.inner.tol) { converged = true; break; }
    }

    // exact coordinate finisher on the expanded pinball objective
    Eigen::MatrixXd th = mat_of(vec);
    double last_move = 0.0;
    {
        const Eigen::Index rows = n * static_cast<Eigen::Index>(num_g);
        Eigen::MatrixXd resid(n, static_cast<Eigen::Index>(num_g));
        for (std::size_t g = 0; g < num_g; ++g)
            resid.col(static_cast<Eigen::Index>(g)) = y - x * (th.transpose() * basis[g]);
        std::vector<double> tau_rows(static_cast<std::size_t>(rows));
        for (std::size_t g = 0; g < num_g; ++g)
            for (Eigen::Index i = 0; i < n; ++i)
                tau_rows[g * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] =
                    tau_grid[g];
        Eigen::VectorXd u_flat(rows), v_flat(rows);
        for (int pass = 0; pass < 8; ++pass) {
            last_move = 0.0;
            for (Eigen::Index mm = 0; mm < m; ++mm) {
                for (Eigen::Index j = 0; j < k; ++j) {
                    for (std::size_t g = 0; g < num_g; ++g) {
                        const Eigen::Index off =
                            static_cast<Eigen::Index>(g) * n;
                        u_flat.segment(off, n) = resid.col(static_cast<Eigen::Index>(g));
                        v_flat.segment(off, n) = basis[g](mm) * x.col(j);
                    }
                    const auto [plus, minus] = detail::section_derivatives(
                        u_flat, v_flat, nullptr, &tau_rows,
                        1e-9 * (1.0 + y.cwiseAbs().maxCoeff()));
                    if (plus >= 0.0 && minus >= 0.0) continue;
                    const double step =
                        detail::pinball_line_search(u_flat, v_flat, nullptr, &tau_rows);
                    if (step != 0.0) {
                        th(mm, j) += step;
                        last_move = std::max(last_move, std::fabs(step));
                        for (std::size_t g = 0; g < num_g; ++g)
                            resid.col(static_cast<Eigen::Index>(g)).noalias() -=
                                step * basis[g](mm) * x.col(j);
                    }
                }
            }
            if (last_move == 0.0) break;
        }
    }
    if (!converged && last_move > 1e-3)
        throw ConvergenceError("fit_pqr: iteration cap of " +
                               std::to_string(opt.inner.max_iter) +
                               " reached and the finisher is still moving");

    FittedPqr fit;
    fit.theta = th;
    fit.basis_degree = degree;
    fit.legendre_basis = opt.legendre_basis;
    fit.tau_grid = tau_grid;
    fit.iterations = iter;
    fit.converged = true;
    fit.column_names = design.column_names;
    fit.objective = pqr_objective(fit, design, y);

    // predicted quantiles should not decrease in tau at observed rows
    Eigen::VectorXd prev = x * pqr_coefficients_at(fit, tau_grid[0]);
    for (std::size_t g = 1; g < num_g; ++g) {
        const Eigen::VectorXd cur = x * pqr_coefficients_at(fit, tau_grid[g]);
        for (Eigen::Index i = 0; i < n; ++i)
            if (prev(i) > cur(i) + 1e-8) ++fit.monotonicity_violations;
        prev = cur;
    }
    return fit;
}

/// VaR back-transform exp(x'gamma) for a log-scale quantile fit.
inline double predict_var(const FittedQuantile& fit, const Eigen::RowVectorXd& row) {
    if (row.size() != fit.coefficients.size())
        throw LayoutError("predict_var: design row does not match fit");
    return std::exp(row.dot(fit.coefficients));
}

inline double predict_var(const FittedPqr& fit, const Eigen::RowVectorXd& row, double tau) {
    if (!(tau > 0.0 && tau < 1.0))
        throw FeasibilityError("predict_var: quantile level outside (0,1)");
    const Eigen::VectorXd gamma = pqr_coefficients_at(fit, tau);
    if (row.size() != gamma.size())
        throw LayoutError("predict_var: design row does not match fit");
    return std::exp(row.dot(gamma));
}

} // namespace ratekit
