#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ratekit/glm.hpp"
#include "ratekit/rng.hpp"
#include "test_support.hpp"

using namespace ratekit;
using testutil::make_design;

namespace {

/// Plain logistic regression by Newton iteration, the oracle for the
/// exposure-corrected fit at unit exposure.
Eigen::VectorXd plain_logistic_oracle(const Eigen::MatrixXd& x, const std::vector<int>& r) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(x.cols());
        Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(x.cols(), x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-x.row(i).dot(beta)));
            grad += (r[static_cast<std::size_t>(i)] - s) * x.row(i).transpose();
            hess += s * (1.0 - s) * x.row(i).transpose() * x.row(i);
        }
        const Eigen::VectorXd step = hess.ldlt().solve(grad);
        beta += step;
        if (step.cwiseAbs().maxCoeff() < 1e-12) break;
    }
    return beta;
}

} // namespace

TEST_CASE("intercept-only logistic recovers the logit of the claim share") {
    const int n = 200;
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, 1);
    std::vector<int> r(n, 0);
    for (int i = 0; i < 60; ++i) r[static_cast<std::size_t>(i)] = 1;
    const std::vector<double> w(n, 1.0);
    const auto fit = fit_logistic_exposure(make_design(x), r, w);
    const double q = 60.0 / 200.0;
    CHECK(fit.converged);
    CHECK(std::fabs(fit.coefficients(0) - std::log(q / (1.0 - q))) < 1e-8);
}

TEST_CASE("unit exposure reduces to standard logistic regression") {
    RngStream rng = RngStream::keyed(21);
    const Eigen::Index n = 500;
    auto design = testutil::random_design(n, 3, rng);
    std::vector<int> r(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double eta = -0.5 + 0.8 * design.values(i, 1) - 0.4 * design.values(i, 2);
        r[static_cast<std::size_t>(i)] = rng.next_bernoulli(1.0 / (1.0 + std::exp(-eta)));
    }
    const std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    const auto fit = fit_logistic_exposure(design, r, w);
    const Eigen::VectorXd oracle = plain_logistic_oracle(design.values, r);
    CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("logistic fitting is deterministic") {
    RngStream rng = RngStream::keyed(22);
    auto design = testutil::random_design(300, 2, rng);
    std::vector<int> r(300);
    std::vector<double> w(300);
    for (int i = 0; i < 300; ++i) {
        r[static_cast<std::size_t>(i)] = rng.next_bernoulli(0.3);
        w[static_cast<std::size_t>(i)] = 0.2 + 0.8 * rng.next_u01();
    }
    const auto a = fit_logistic_exposure(design, r, w);
    const auto b = fit_logistic_exposure(design, r, w);
    REQUIRE(a.coefficients == b.coefficients);
    REQUIRE(a.covariance == b.covariance);
}

TEST_CASE("perfect separation raises a convergence error") {
    Eigen::MatrixXd x(20, 2);
    std::vector<int> r(20);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = i < 10 ? 0.0 : 1.0;
        r[static_cast<std::size_t>(i)] = i < 10 ? 0 : 1;
    }
    const std::vector<double> w(20, 1.0);
    CHECK_THROWS_AS(fit_logistic_exposure(make_design(x), r, w), ConvergenceError);
}

TEST_CASE("collinear design raises a rank error naming columns") {
    Eigen::MatrixXd x(30, 3);
    RngStream rng = RngStream::keyed(23);
    for (int i = 0; i < 30; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = rng.next_normal();
        x(i, 2) = 2.0 * x(i, 1);  // exactly dependent
    }
    std::vector<int> r(30);
    for (int i = 0; i < 30; ++i) r[static_cast<std::size_t>(i)] = i % 3 == 0;
    const std::vector<double> w(30, 1.0);
    CHECK_THROWS_AS(fit_logistic_exposure(make_design(x), r, w), RankError);
}

TEST_CASE("gamma regression with intercept only returns the log mean") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(50, 1);
    Eigen::VectorXd y(50);
    RngStream rng = RngStream::keyed(31);
    for (int i = 0; i < 50; ++i) y(i) = 50.0 + 100.0 * rng.next_u01();
    const auto fit = fit_gamma_log(make_design(x), y);
    CHECK(std::fabs(fit.coefficients(0) - std::log(y.mean())) < 1e-8);
}

TEST_CASE("gamma regression recovers known coefficients within three SEs") {
    RngStream rng = RngStream::keyed(37);
    const Eigen::Index n = 200;
    auto design = testutil::random_design(n, 3, rng);
    const Eigen::Vector3d beta_true(4.0, 0.5, -0.3);
    const double dispersion = 0.5;  // Gamma shape 2
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = std::exp(design.values.row(i).dot(beta_true));
        y(i) = rng.next_gamma(1.0 / dispersion, dispersion * mu);
    }
    const auto fit = fit_gamma_log(design, y);
    REQUIRE(fit.converged);
    for (Eigen::Index j = 0; j < 3; ++j) {
        const double se = std::sqrt(fit.covariance(j, j));
        CHECK(std::fabs(fit.coefficients(j) - beta_true(j)) < 3.0 * se);
    }
    CHECK(fit.dispersion == Catch::Approx(dispersion).margin(0.2));

    // score equation at convergence: X'(y - mu)/mu = 0
    const Eigen::ArrayXd mu = (design.values * fit.coefficients).array().exp();
    const Eigen::VectorXd score =
        design.values.transpose() * ((y.array() - mu) / mu).matrix();
    CHECK(score.cwiseAbs().maxCoeff() / static_cast<double>(n) < 1e-6);
}

TEST_CASE("gamma error paths") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(5, 1);
    Eigen::VectorXd y(5);
    y << 1.0, 2.0, 0.0, 3.0, 4.0;
    CHECK_THROWS_AS(fit_gamma_log(make_design(x), y), DomainError);

    Eigen::MatrixXd wide = Eigen::MatrixXd::Ones(2, 3);
    Eigen::VectorXd short_y(2);
    short_y << 1.0, 2.0;
    CHECK_THROWS_AS(fit_gamma_log(make_design(wide), short_y), ValidationError);
}

TEST_CASE("no-claim probability respects limits and exposure scaling") {
    FittedGlm logit;
    logit.family = GlmFamily::logistic_exposure;
    logit.column_names = {"(Intercept)"};
    logit.coefficients = Eigen::VectorXd::Constant(1, -40.0);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Ones(1);

    CHECK(predict_no_claim_prob(logit, row, 1.0) >= 1.0 - 1e-9);

    logit.coefficients(0) = -1.0;
    const double p_full = predict_no_claim_prob(logit, row, 1.0);
    const double p_half = predict_no_claim_prob(logit, row, 0.5);
    CHECK((1.0 - p_half) == Catch::Approx(0.5 * (1.0 - p_full)).epsilon(1e-12));

    CHECK_THROWS_AS(predict_no_claim_prob(logit, row, 0.0), ValidationError);
}

TEST_CASE("pure premium and two-part variance") {
    FittedGlm logit, gamma;
    logit.family = GlmFamily::logistic_exposure;
    gamma.family = GlmFamily::gamma_log;
    logit.column_names = gamma.column_names = {"(Intercept)"};
    gamma.coefficients = Eigen::VectorXd::Constant(1, std::log(200.0));
    gamma.dispersion = 1.5;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Ones(1);

    SECTION("certain no-claim gives zero premium") {
        logit.coefficients = Eigen::VectorXd::Constant(1, -60.0);
        CHECK(pure_premium(logit, gamma, row, 1.0) < 1e-6);
        CHECK(two_part_variance(logit, gamma, row, 1.0) < 1e-3);
    }
    SECTION("certain claim leaves the pure gamma variance") {
        logit.coefficients = Eigen::VectorXd::Constant(1, 60.0);
        const double mu = 200.0;
        CHECK(two_part_variance(logit, gamma, row, 1.0) ==
              Catch::Approx(1.5 * mu * mu).epsilon(1e-6));
    }
    SECTION("monte-carlo oracle for the mixed variance") {
        logit.coefficients = Eigen::VectorXd::Constant(1, 0.8472978603872037);  // sigmoid=0.7
        const double p = predict_no_claim_prob(logit, row, 1.0);  // 1 - 0.7 = 0.3
        const double formula = two_part_variance(logit, gamma, row, 1.0);
        RngStream rng = RngStream::keyed(41);
        const int n = 1000000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            double v = 0.0;
            if (!rng.next_bernoulli(p)) v = rng.next_gamma(1.0 / 1.5, 1.5 * 200.0);
            sum += v;
            sq += v * v;
        }
        const double mean = sum / n;
        const double var = sq / n - mean * mean;
        CHECK(std::fabs(var - formula) / formula < 0.01);
    }
    SECTION("layout mismatch raises") {
        logit.coefficients = Eigen::VectorXd::Constant(1, 0.0);
        FittedGlm other = gamma;
        other.column_names = {"something_else"};
        CHECK_THROWS_AS(pure_premium(logit, other, row, 1.0), LayoutError);
    }
}

TEST_CASE("predicted class frequencies match a simulated portfolio") {
    // three binary covariates, Tweedie-like claim occurrence via Bernoulli
    RngStream rng = RngStream::keyed(43);
    const Eigen::Index n = 50000;
    Eigen::MatrixXd x(n, 4);
    std::vector<int> r(static_cast<std::size_t>(n));
    const Eigen::Vector4d alpha(-1.6, 0.4, 0.3, 0.2);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        for (int j = 1; j <= 3; ++j) x(i, j) = rng.next_bernoulli(0.5) ? 1.0 : 0.0;
        const double s = 1.0 / (1.0 + std::exp(-x.row(i).dot(alpha)));
        r[static_cast<std::size_t>(i)] = rng.next_bernoulli(s);
    }
    const std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    const auto design = make_design(x);
    const auto fit = fit_logistic_exposure(design, r, w);

    // compare fitted claim frequency with the empirical one per class
    for (int cls = 0; cls < 8; ++cls) {
        Eigen::RowVectorXd row(4);
        row << 1.0, (cls >> 2) & 1, (cls >> 1) & 1, cls & 1;
        long count = 0, claims = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (x(i, 1) == row(1) && x(i, 2) == row(2) && x(i, 3) == row(3)) {
                ++count;
                claims += r[static_cast<std::size_t>(i)];
            }
        }
        if (count < 100) continue;
        const double fitted = 1.0 - predict_no_claim_prob(fit, row, 1.0);
        const double empirical = static_cast<double>(claims) / count;
        const double sigma = std::sqrt(empirical * (1.0 - empirical) / count);
        CHECK(std::fabs(fitted - empirical) < 3.5 * sigma + 1e-3);
    }
}
