#include "helpers.hpp"

#include "statmicro/duality.hpp"
#include "statmicro/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace statmicro;

TEST_CASE("utility from demand matches the closed-form utility") {
    std::mt19937_64 rng(21);
    for (double a : {0.5, 1.0, 2.0}) {
        for (std::size_t n : {1, 2, 3}) {
            auto p = ModelParams::uniform(n, a, 1.0, 1.0, 1.0, 10.0);
            p.d = helpers::log_uniform_vector(rng, n, 0.2, 5.0);
            for (int k = 0; k < 5; ++k) {
                const QuantityVector q(helpers::log_uniform_vector(rng, n, 0.1, 10.0));
                CHECK(helpers::rel(utility_from_demand(p, q), model_utility(p, q)) < 1e-7);
            }
        }
    }
}

TEST_CASE("numerical and closed-form dual prices agree and exhaust the budget") {
    auto p = ModelParams::uniform(3, 1.5, 1.0, 1.0, 1.0, 7.0);
    p.d << 1.0, 2.0, 0.5;
    const QuantityVector q{1.0, 3.0, 0.2};
    const auto numeric = solve_dual_prices(p, q);
    const Vector closed = dual_prices(p, q).values();
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(helpers::rel(numeric.p[i], closed(i)) < 1e-7);
    CHECK(closed.dot(q.values()) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("demand from the model utility recovers the model demand") {
    auto p = ModelParams::uniform(2, 1.0, 1.0, 1.0, 1.0, 4.0);
    p.d << 2.0, 1.0;
    const PriceVector price{0.5, 2.0};
    const auto sol = demand_from_utility([&](const QuantityVector& q) { return model_utility(p, q); }, price, p.m);
    CHECK(helpers::rel(sol.demand, demand(p, price)) < 1e-8);
    CHECK(price.values().dot(sol.q.values()) == doctest::Approx(p.m));
}

TEST_CASE("profit-maximising supply is the model supply under the linked cost") {
    std::mt19937_64 rng(22);
    for (int k = 0; k < 20; ++k) {
        const auto p = helpers::random_params(rng, 3);
        const CostParams cost = CostParams::linked(p, helpers::log_uniform_vector(rng, 3, 0.2, 5.0));
        const PriceVector price(helpers::log_uniform_vector(rng, 3, 0.2, 5.0));
        const QuantityVector q = supply_from_profit(cost, price);
        CHECK(helpers::rel(aggregate_supply(cost, q), supply(p, price)) < 1e-12);
        // q is a stationary point of profit in each coordinate
        for (Eigen::Index i = 0; i < 3; ++i) {
            const double h = 1e-5 * q[static_cast<std::size_t>(i)];
            Vector up = q.values(), dn = q.values();
            up(i) += h;
            dn(i) -= h;
            const double slope = (profit(cost, price, QuantityVector(up)) - profit(cost, price, QuantityVector(dn))) / (2 * h);
            CHECK(std::abs(slope) < 1e-6 * price[static_cast<std::size_t>(i)]);
        }
    }
}

TEST_CASE("market clearing spends the budget where demand meets supply prices") {
    auto p = ModelParams::uniform(2, 1.0, 1.0, 1.0, 1.0, 100.0);
    p.d << 1.0, 2.0;
    const CostParams cost = CostParams::linked(p, Vector::Ones(2));
    const auto mc = market_clearing(p, cost);
    CHECK(mc.expenditure == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(mc.residual < 1e-9);
    const Vector dual = dual_prices(p, mc.q_star).values();
    for (Eigen::Index i = 0; i < 2; ++i) {
        CHECK(helpers::rel(dual(i), mc.p_star[static_cast<std::size_t>(i)]) < 1e-8);
        CHECK(helpers::rel(cost.beta(i) * std::pow(mc.q_star[static_cast<std::size_t>(i)], 1.0 / cost.b(i)),
                           mc.p_star[static_cast<std::size_t>(i)]) < 1e-8);
    }
}

TEST_CASE("cost parameter validation") {
    const auto p = ModelParams::uniform(2, 1.0, 1.0, 1.0, 1.0, 1.0);
    CHECK_THROWS_AS(CostParams::linked(p, Vector::Ones(3)), DomainError);
    CostParams bad = CostParams::linked(p, Vector::Ones(2));
    bad.alpha(0) = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("quadratic demand matches the utility at its stationary bundle") {
    Matrix M(2, 2);
    M << 2.0, 0.3, 0.3, 1.0;
    Vector h(2);
    h << 0.5, -0.2;
    const PriceVector price{1.0, 2.0};
    const Vector q = quadratic_demand_bundle(M, h, price, 3.0);
    CHECK(price.values().dot(q) == doctest::Approx(3.0));
    CHECK(quadratic_demand(M, h, price, 3.0) == doctest::Approx(quadratic_utility(M, h, q)).epsilon(1e-12));
    Matrix bad(2, 2);
    bad << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(quadratic_demand(bad, h, price, 3.0), LinearAlgebraError);
}

TEST_CASE("the power-law potential has a single interior minimum") {
    auto p = ModelParams::uniform(2, 1.0, 2.0, 1.0, 3.0, 10.0);
    const auto survey = survey_minima(PowerLawPotential(p));
    REQUIRE(survey.unique_interior_minimum());
    const Vector p0 = stationary_prices(p).values();
    CHECK(std::exp(survey.interior_minima.front()(0)) == doctest::Approx(p0(0)).epsilon(1e-5));
}

TEST_CASE("quadratic demand with model supply escapes to the boundary") {
    const auto supply_params = ModelParams::uniform(2, 1.0, 1.0, 1.0, 1.0, 1.0);
    const QuadraticDemandPotential model(Matrix::Identity(2, 2), Vector::Zero(2), supply_params);
    const auto survey = survey_minima(model);
    CHECK_FALSE(survey.unique_interior_minimum());
    CHECK(survey.starts == 50);
}
