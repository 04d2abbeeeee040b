#include "helpers.hpp"
#include "oracles.hpp"

#include "statmicro/errors.hpp"
#include "statmicro/model.hpp"

#include <doctest.h>

using namespace statmicro;

TEST_CASE("stationary prices minimise each separable term") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = helpers::random_params(rng, 3);
        const Vector p0 = stationary_prices(p).values();
        for (Eigen::Index i = 0; i < 3; ++i) {
            const long double a = p.a(i), b = p.b(i), d = p.d(i), s = p.s(i);
            const auto term = [&](long double x) { return d * std::exp(-a * x) + s * std::exp(b * x); };
            const long double x = oracle::minimize_1d(term, -20.0L, 20.0L);
            CHECK(helpers::rel(p0(i), static_cast<double>(std::exp(x))) < 1e-10);
        }
    }
}

TEST_CASE("demand decreases and supply increases in every price") {
    std::mt19937_64 rng(12);
    const auto p = helpers::random_params(rng, 2);
    const PriceVector base{1.3, 0.7};
    for (Eigen::Index i = 0; i < 2; ++i) {
        Vector up = base.values();
        up(i) *= 1.01;
        CHECK(demand(p, PriceVector(up)) < demand(p, base));
        CHECK(supply(p, PriceVector(up)) > supply(p, base));
    }
    CHECK(potential(p, base) == doctest::Approx(demand(p, base) + supply(p, base)));
}

TEST_CASE("gamma is the curvature of the potential in log price") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = helpers::random_params(rng, 2);
        const Vector p0 = stationary_prices(p).values();
        const Vector gamma = gamma_coefficients(p);
        for (Eigen::Index i = 0; i < 2; ++i) {
            const auto v = [&](long double y) {
                Vector q = p0;
                q(i) = static_cast<double>(p0(i) * std::exp(y));
                return static_cast<long double>(potential(p, PriceVector(q)));
            };
            const double curvature = static_cast<double>(oracle::second_derivative(v, 0.0L, 1e-3L));
            CHECK(helpers::rel(curvature / p.m, gamma(i)) < 1e-5);
        }
    }
}

TEST_CASE("potential minimum and classical prices") {
    const auto p = ModelParams::uniform(2, 1.0, 2.0, 4.0, 1.0, 10.0);
    CHECK(potential_minimum(p) == doctest::Approx(potential(p, stationary_prices(p))));
    const Vector pstar = classical_market_prices(p).values();
    // demand term equals supply term at p*
    CHECK(4.0 / pstar(0) == doctest::Approx(pstar(0) * pstar(0)));
    CHECK(log_price_offsets(p)(0) == doctest::Approx(std::log(stationary_prices(p)[0])));
}

TEST_CASE("model utility is homogeneous of degree a in q") {
    auto p = ModelParams::uniform(3, 1.5, 1.0, 1.0, 1.0, 10.0);
    p.d << 1.0, 2.0, 3.0;
    const QuantityVector q{1.0, 2.0, 0.5};
    const QuantityVector q2(Vector(2.0 * q.values()));
    CHECK(model_utility(p, q2) == doctest::Approx(std::pow(2.0, 1.5) * model_utility(p, q)).epsilon(1e-12));
}

TEST_CASE("validation errors name the field") {
    auto p = ModelParams::uniform(2, 1, 1, 1, 1, 1);
    p.d(1) = -1.0;
    try {
        p.validate();
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "d");
    }
    p = ModelParams::uniform(2, 1, 1, 1, 1, 1);
    p.m = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = ModelParams::uniform(2, 1, 1, 1, 1, 1);
    p.rotation(0, 1) = 0.5;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = ModelParams::uniform(2, 1, 1, 1, 1, 1);
    p.kinetic_vel(0) = 0.0;
    CHECK_NOTHROW(p.validate());
    p.kinetic_accel(0) = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("positive vectors reject non-positive entries and size mismatch") {
    CHECK_THROWS_AS(PriceVector({1.0, 0.0}), DomainError);
    CHECK_THROWS_AS(QuantityVector({-1.0}), DomainError);
    CHECK_THROWS_AS(PriceVector({std::nan("")}), DomainError);
    const auto p = ModelParams::uniform(2, 1, 1, 1, 1, 1);
    CHECK_THROWS_AS(demand(p, PriceVector{1.0}), DomainError);
}

TEST_CASE("heterogeneous demand exponents have no closed-form utility") {
    auto p = ModelParams::uniform(2, 1, 1, 1, 1, 1);
    p.a(1) = 2.0;
    CHECK_FALSE(p.uniform_demand_exponent());
    CHECK_THROWS_AS(model_utility(p, QuantityVector{1.0, 1.0}), UnsupportedConfiguration);
}

TEST_CASE("power-law potential matches the free functions") {
    const auto p = ModelParams::uniform(2, 0.5, 2.0, 3.0, 1.0, 5.0);
    const PowerLawPotential model(p);
    const PriceVector x{0.8, 2.0};
    CHECK(model.potential(x) == doctest::Approx(potential(p, x)));
    CHECK(model.size() == 2);
}
