#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ratekit/evaluation.hpp"

using namespace ratekit;

TEST_CASE("ordered Lorenz curve on the two-policy example") {
    const std::vector<double> losses = {0.0, 10.0};
    const std::vector<double> base = {1.0, 1.0};
    const std::vector<double> competing = {1.0, 2.0};
    const auto curve = ordered_lorenz(losses, base, competing);
    REQUIRE(curve.premium_share.size() == 3);
    CHECK(curve.premium_share[0] == 0.0);
    CHECK(curve.loss_share[0] == 0.0);
    CHECK(curve.premium_share[1] == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(curve.loss_share[1] == 0.0);
    CHECK(curve.premium_share[2] == 1.0);
    CHECK(curve.loss_share[2] == 1.0);

    CHECK(gini_index(curve) == Catch::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("identical premiums give the diagonal and zero Gini") {
    std::vector<double> losses, premiums;
    for (int i = 0; i < 50; ++i) {
        losses.push_back(static_cast<double>((i * 37) % 11));
        premiums.push_back(1.0 + static_cast<double>(i % 7));
    }
    const auto curve = ordered_lorenz(losses, premiums, premiums);
    for (std::size_t i = 0; i < curve.premium_share.size(); ++i) {
        // with constant relative premium the ordering is input order, so the
        // curve tracks the premium-weighted loss accumulation; Gini measures
        // the gap to the diagonal
        CHECK(curve.premium_share[i] >= 0.0);
        CHECK(curve.premium_share[i] <= 1.0);
    }
    CHECK(std::fabs(gini_index(ordered_lorenz(premiums, premiums, premiums))) < 1e-12);
}

TEST_CASE("curve is invariant to input order and competing scale") {
    const std::vector<double> losses = {5.0, 0.0, 2.0, 9.0};
    const std::vector<double> base = {2.0, 1.0, 3.0, 4.0};
    const std::vector<double> competing = {1.0, 3.0, 2.0, 8.0};

    const auto curve = ordered_lorenz(losses, base, competing);

    const std::vector<double> losses_r = {9.0, 2.0, 0.0, 5.0};
    const std::vector<double> base_r = {4.0, 3.0, 1.0, 2.0};
    const std::vector<double> competing_r = {8.0, 2.0, 3.0, 1.0};
    const auto reversed = ordered_lorenz(losses_r, base_r, competing_r);
    CHECK(curve.premium_share == reversed.premium_share);
    CHECK(curve.loss_share == reversed.loss_share);

    std::vector<double> competing3 = competing;
    for (auto& v : competing3) v *= 3.0;
    const auto scaled = ordered_lorenz(losses, base, competing3);
    CHECK(curve.premium_share == scaled.premium_share);
    CHECK(curve.loss_share == scaled.loss_share);
    CHECK(gini_index(curve) == gini_index(scaled));
}

TEST_CASE("lorenz validation") {
    const std::vector<double> ok = {1.0, 2.0};
    CHECK_THROWS_AS(ordered_lorenz(ok, std::vector<double>{0.0, 1.0}, ok), DomainError);
    CHECK_THROWS_AS(ordered_lorenz(std::vector<double>{0.0, 0.0}, ok, ok), DomainError);
    CHECK_THROWS_AS(ordered_lorenz(std::vector<double>{1.0}, std::vector<double>{1.0},
                                   std::vector<double>{1.0}),
                    ValidationError);
}

TEST_CASE("gini matrix of identical models is zero with a tie") {
    std::vector<double> losses, premiums;
    RngStream rng = RngStream::keyed(5150);
    for (int i = 0; i < 200; ++i) {
        losses.push_back(rng.next_bernoulli(0.2) ? rng.next_gamma(1.0, 100.0) : 0.0);
        premiums.push_back(20.0 + 10.0 * rng.next_u01());
    }
    const std::vector<NamedPremiums> models = {{"a", premiums}, {"b", premiums}};
    const auto gm = gini_matrix(models, losses, 5, 0.5, 42);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t c = 0; c < 2; ++c) CHECK(gm.mean[b][c] == 0.0);
    CHECK(gm.mean[0][0] == 0.0);
    CHECK(gm.winner == 0);
    CHECK(gm.tie);
}

TEST_CASE("gini matrix is seed-deterministic and validates inputs") {
    RngStream rng = RngStream::keyed(606);
    std::vector<double> losses, p1, p2;
    for (int i = 0; i < 300; ++i) {
        const double risk = 10.0 + 90.0 * rng.next_u01();
        losses.push_back(rng.next_bernoulli(0.3) ? risk * rng.next_gamma(1.0, 2.0) : 0.0);
        p1.push_back(risk);
        p2.push_back(100.0 - 0.5 * risk);
    }
    const std::vector<NamedPremiums> models = {{"good", p1}, {"bad", p2}};
    const auto a = gini_matrix(models, losses, 10, 0.5, 1);
    const auto b = gini_matrix(models, losses, 10, 0.5, 1);
    CHECK(a.mean == b.mean);
    CHECK(a.se == b.se);

    // the premium aligned with risk should win the mini-max rule
    CHECK(a.model_names[a.winner] == "good");
    CHECK(a.row_max[a.winner] <= a.row_max[1 - a.winner]);

    const std::vector<NamedPremiums> bad_model = {{"neg", {1.0, -1.0, 1.0}},
                                                  {"ok", {1.0, 1.0, 1.0}}};
    CHECK_THROWS_AS(gini_matrix(bad_model, std::vector<double>{1.0, 2.0, 3.0}, 2, 0.5, 1),
                    DomainError);
    CHECK_THROWS_AS(gini_matrix({models[0]}, losses, 2, 0.5, 1), ValidationError);
}

TEST_CASE("degenerate splits resample and all-zero losses fail") {
    const std::vector<double> losses = {0.0, 0.0, 0.0, 0.0};
    const std::vector<NamedPremiums> models = {{"a", {1.0, 2.0, 3.0, 4.0}},
                                               {"b", {4.0, 3.0, 2.0, 1.0}}};
    CHECK_THROWS_AS(gini_matrix(models, losses, 2, 0.5, 9), DomainError);

    const std::vector<double> one_claim = {0.0, 0.0, 0.0, 7.0};
    const auto gm = gini_matrix(models, one_claim, 4, 0.5, 11);
    CHECK(gm.n_splits == 4);  // resampling kept every split usable
}

TEST_CASE("class metrics over replicates") {
    SECTION("perfect prediction") {
        const std::vector<std::vector<double>> truth = {{10.0, 20.0}, {10.0, 20.0}};
        const auto m = class_metrics(truth, truth, {"c1", "c2"});
        CHECK(m.bias == std::vector<double>{0.0, 0.0});
        CHECK(m.mse == std::vector<double>{0.0, 0.0});
        CHECK(m.variance == std::vector<double>{0.0, 0.0});
    }
    SECTION("constant offset") {
        const std::vector<std::vector<double>> truth = {{10.0, 20.0}, {10.0, 20.0}};
        const std::vector<std::vector<double>> pred = {{7.0, 17.0}, {7.0, 17.0}};
        const auto m = class_metrics(truth, pred, {"c1", "c2"});
        CHECK(m.bias[0] == Catch::Approx(3.0));
        CHECK(m.mse[0] == Catch::Approx(9.0));
        CHECK(m.variance[0] == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("two-replicate hand computation") {
        const std::vector<std::vector<double>> truth = {{10.0, 20.0}, {10.0, 20.0}};
        const std::vector<std::vector<double>> pred = {{9.0, 22.0}, {12.0, 19.0}};
        const auto m = class_metrics(truth, pred, {"c1", "c2"});
        CHECK(m.bias[0] == Catch::Approx(-0.5));
        CHECK(m.mse[0] == Catch::Approx(2.5));
        CHECK(m.variance[0] == Catch::Approx(2.25));
        CHECK(m.bias[1] == Catch::Approx(-0.5));
        CHECK(m.mse[1] == Catch::Approx(2.5));
    }
    SECTION("misalignment raises") {
        CHECK_THROWS_AS(class_metrics({{1.0}}, {{1.0, 2.0}}, {"c1"}), LayoutError);
    }
}
