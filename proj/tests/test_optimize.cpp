#include "statmicro/errors.hpp"
#include "statmicro/optimize.hpp"

#include <doctest.h>

#include <cmath>

using namespace statmicro;
using namespace statmicro::optimize;

TEST_CASE("budget stationary point of a Cobb-Douglas objective") {
    // max sum_i w_i ln x_i on sum_i p_i x_i = B has x_i = w_i B / (p_i sum w)
    Vector w(3);
    w << 0.2, 0.3, 0.5;
    Vector price(3);
    price << 1.0, 2.0, 4.0;
    const auto f = [&](const Vector& x) { return (w.array() * x.array().log()).sum(); };
    const auto r = budget_stationary_point(f, price, 10.0);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(r.x(i) == doctest::Approx(w(i) * 10.0 / price(i)).epsilon(1e-9));
    CHECK(price.dot(r.x) == doctest::Approx(10.0));
}

TEST_CASE("budget solver reports non-convergence with the last iterate") {
    // linear objective: the optimum sits on the boundary of the simplex
    Vector price = Vector::Ones(2);
    const auto f = [](const Vector& x) { return x(0) + 2.0 * x(1); };
    try {
        budget_stationary_point(f, price, 1.0);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.last_iterate().size() == 2);
    }
}

TEST_CASE("Levenberg-Marquardt fits an exponential decay") {
    std::vector<double> t, y;
    for (int k = 0; k < 20; ++k) {
        t.push_back(0.2 * k);
        y.push_back(3.0 * std::exp(-1.7 * t.back()));
    }
    const auto residual = [&](const Vector& th) {
        Vector r(20);
        for (int k = 0; k < 20; ++k) r(k) = th(0) * std::exp(-th(1) * t[k]) - y[k];
        return r;
    };
    Vector start(2);
    start << 1.0, 0.5;
    const auto r = levenberg_marquardt(residual, start);
    CHECK(r.converged);
    CHECK(r.theta(0) == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(r.theta(1) == doctest::Approx(1.7).epsilon(1e-8));
    for (std::size_t k = 1; k < r.objective_trace.size(); ++k) CHECK(r.objective_trace[k] <= r.objective_trace[k - 1]);
}

TEST_CASE("BFGS minimises the Rosenbrock function and flags divergence") {
    const auto rosen = [](const Vector& x) { return 100 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1 - x(0), 2); };
    Vector x0(2);
    x0 << -1.2, 1.0;
    const auto r = minimize_bfgs(rosen, x0);
    CHECK(r.converged);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-5));
    const auto slope = [](const Vector& x) { return -x(0); };
    const auto d = minimize_bfgs(slope, Vector::Zero(1));
    CHECK(d.diverged);
    CHECK_FALSE(d.converged);
}

TEST_CASE("fourth-order gradient") {
    const auto f = [](const Vector& x) { return std::sin(x(0)) * std::exp(x(1)); };
    Vector x(2);
    x << 0.3, -0.2;
    const Vector g = numerical_gradient(f, x, 1e-3);
    CHECK(g(0) == doctest::Approx(std::cos(0.3) * std::exp(-0.2)).epsilon(1e-10));
    CHECK(g(1) == doctest::Approx(std::sin(0.3) * std::exp(-0.2)).epsilon(1e-10));
}
