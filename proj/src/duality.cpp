#include "statmicro/duality.hpp"

#include "statmicro/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace statmicro {

namespace {

void require_size(const Vector& v, std::size_t n, const char* what) {
    if (static_cast<std::size_t>(v.size()) != n) {
        std::ostringstream os;
        os << what << " has " << v.size() << " entries, expected " << n;
        throw DomainError(os.str());
    }
}

void require_uniform_a(const ModelParams& params) {
    if (!params.uniform_demand_exponent()) {
        throw UnsupportedConfiguration("duality closed forms require a common demand exponent a_i = a");
    }
}

Eigen::LLT<Matrix> spd_factor(const Matrix& M) {
    if (M.rows() != M.cols() || M.rows() == 0) {
        throw LinearAlgebraError("M must be a non-empty square matrix");
    }
    if (!(M - M.transpose()).isZero(1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff()))) {
        throw LinearAlgebraError("M must be symmetric");
    }
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success) {
        throw LinearAlgebraError("M is not positive definite");
    }
    return llt;
}

}  // namespace

void CostParams::validate() const {
    const auto n = beta.size();
    if (n == 0 || b.size() != n || alpha.size() != n) {
        throw ValidationError("cost parameters need equal, non-empty beta, b and alpha");
    }
    if ((beta.array() <= 0.0).any()) throw ValidationError("cost 'beta' entries must be > 0", "beta");
    if ((b.array() <= 0.0).any()) throw ValidationError("cost 'b' entries must be > 0", "b");
    if ((alpha.array() <= 0.0).any()) throw ValidationError("cost 'alpha' entries must be > 0", "alpha");
}

CostParams CostParams::linked(const ModelParams& params, Vector beta) {
    require_size(beta, params.n_commodities, "beta");
    CostParams cost;
    cost.b = params.b;
    cost.alpha = (params.m * params.s.array() * beta.array().pow(params.b.array())).matrix();
    cost.beta = std::move(beta);
    cost.validate();
    return cost;
}

DemandSolution demand_from_utility(const UtilityFn& utility, const PriceVector& p, double m,
                                   const optimize::BudgetSolveOptions& options) {
    if (!(m > 0.0)) throw DomainError("budget must be positive");
    const auto f = [&](const Vector& x) { return utility(QuantityVector(x)); };
    const auto solved = optimize::budget_stationary_point(f, p.values(), m, options);
    return {QuantityVector(solved.x), solved.value};
}

DualPriceSolution solve_dual_prices(const ModelParams& params, const QuantityVector& q) {
    require_uniform_a(params);
    require_size(q.values(), params.n_commodities, "quantity vector");
    const auto f = [&](const Vector& x) { return demand(params, PriceVector(x)); };
    const auto solved = optimize::budget_stationary_point(f, q.values(), params.m);
    return {PriceVector(solved.x), solved.value};
}

double utility_from_demand(const ModelParams& params, const QuantityVector& q) {
    return solve_dual_prices(params, q).utility;
}

PriceVector dual_prices(const ModelParams& params, const QuantityVector& q) {
    require_uniform_a(params);
    require_size(q.values(), params.n_commodities, "quantity vector");
    const double a = params.a(0);
    const auto dq = params.d.array().pow(1.0 / (a + 1.0));
    const double scale = params.m / (dq * q.values().array().pow(a / (a + 1.0))).sum();
    return PriceVector((scale * (params.d.array() / q.values().array()).pow(1.0 / (a + 1.0))).matrix());
}

QuantityVector supply_from_profit(const CostParams& cost, const PriceVector& p) {
    require_size(p.values(), static_cast<std::size_t>(cost.beta.size()), "price vector");
    return QuantityVector((p.values().array() / cost.beta.array()).pow(cost.b.array()).matrix());
}

double profit(const CostParams& cost, const PriceVector& p, const QuantityVector& q) {
    const auto n = static_cast<std::size_t>(cost.beta.size());
    require_size(p.values(), n, "price vector");
    require_size(q.values(), n, "quantity vector");
    const auto& b = cost.b.array();
    const double revenue = p.values().dot(q.values());
    const double total_cost = (b / (1.0 + b) * cost.beta.array() * q.values().array().pow(1.0 + b.inverse())).sum();
    return revenue - total_cost;
}

double aggregate_supply(const CostParams& cost, const QuantityVector& q) {
    require_size(q.values(), static_cast<std::size_t>(cost.alpha.size()), "quantity vector");
    return 0.5 * cost.alpha.dot(q.values());
}

MarketClearing market_clearing(const ModelParams& params, const CostParams& cost,
                               const MarketClearingOptions& options) {
    params.validate();
    cost.validate();
    require_uniform_a(params);
    const std::size_t n = params.n_commodities;
    require_size(cost.beta, n, "cost beta");
    const double a = params.a(0);
    const double inv = 1.0 / (a + 1.0);
    const Vector log_d = params.d.array().log().matrix();
    const Vector log_beta = cost.beta.array().log().matrix();
    const Vector exponent = (cost.b.array().inverse() + inv).matrix();

    // log of the demand-side scale C(q) = m / sum_j d_j^{1/(a+1)} q_j^{a/(a+1)}
    const auto log_scale = [&](const Vector& log_q) {
        return std::log(params.m) - std::log((inv * log_d.array() + a * inv * log_q.array()).exp().sum());
    };
    const auto residual_of = [&](const Vector& log_q) {
        const double lc = log_scale(log_q);
        const Vector log_p_demand = (lc + inv * (log_d.array() - log_q.array())).matrix();
        const Vector log_p_supply = (log_beta.array() + cost.b.array().inverse() * log_q.array()).matrix();
        return (log_p_demand - log_p_supply).cwiseAbs().maxCoeff();
    };

    Vector log_q = Vector::Zero(static_cast<Eigen::Index>(n));
    std::vector<double> trace;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        const double res = residual_of(log_q);
        trace.push_back(res);
        if (res < options.tolerance) {
            const Vector q = log_q.array().exp().matrix();
            Vector p = (cost.beta.array() * q.array().pow(cost.b.array().inverse())).matrix();
            MarketClearing out{QuantityVector(q), PriceVector(p), p.dot(q), res, iter};
            return out;
        }
        if (!std::isfinite(res)) break;
        // demand price = supply price, solved for ln q_i at fixed C
        const Vector target = ((log_scale(log_q) + inv * log_d.array() - log_beta.array()) / exponent.array()).matrix();
        log_q = (1.0 - options.damping) * log_q + options.damping * target;
    }
    const Vector q = log_q.array().exp().matrix();
    throw ConvergenceError("market clearing did not converge", {q.data(), q.data() + q.size()}, trace);
}

double quadratic_demand(const Matrix& M, const Vector& h_lin, const PriceVector& p, double m) {
    const auto llt = spd_factor(M);
    require_size(h_lin, static_cast<std::size_t>(M.rows()), "h_lin");
    require_size(p.values(), static_cast<std::size_t>(M.rows()), "price vector");
    const Vector minv_h = llt.solve(h_lin);
    const Vector minv_p = llt.solve(p.values());
    const double num = m + p.values().dot(minv_h);
    return 0.5 * num * num / p.values().dot(minv_p) - 0.5 * h_lin.dot(minv_h);
}

Vector quadratic_demand_bundle(const Matrix& M, const Vector& h_lin, const PriceVector& p, double m) {
    const auto llt = spd_factor(M);
    require_size(h_lin, static_cast<std::size_t>(M.rows()), "h_lin");
    require_size(p.values(), static_cast<std::size_t>(M.rows()), "price vector");
    const Vector minv_h = llt.solve(h_lin);
    const Vector minv_p = llt.solve(p.values());
    const double zeta = (m + p.values().dot(minv_h)) / p.values().dot(minv_p);
    return llt.solve(zeta * p.values() - h_lin);
}

double quadratic_utility(const Matrix& M, const Vector& h_lin, const Vector& q) {
    return 0.5 * q.dot(M * q) + h_lin.dot(q);
}

QuadraticDemandPotential::QuadraticDemandPotential(Matrix M, Vector h_lin, ModelParams supply_params)
    : M_(std::move(M)), h_lin_(std::move(h_lin)), supply_params_(std::move(supply_params)) {
    supply_params_.validate();
    spd_factor(M_);
    require_size(h_lin_, supply_params_.n_commodities, "h_lin");
}

double QuadraticDemandPotential::demand(const PriceVector& p) const {
    return quadratic_demand(M_, h_lin_, p, supply_params_.m);
}

double QuadraticDemandPotential::supply(const PriceVector& p) const { return statmicro::supply(supply_params_, p); }

MinimumSurvey survey_minima(const PotentialModel& model, const SurveyOptions& options) {
    const auto n = static_cast<Eigen::Index>(model.size());
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> uniform(-options.start_spread, options.start_spread);
    const optimize::ScalarFn objective = [&](const Vector& x) {
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 600.0) return std::numeric_limits<double>::infinity();
        return model.potential(PriceVector(x.array().exp().matrix()));
    };
    optimize::MinimizeOptions min_options;
    min_options.divergence_bound = 2.0 * options.boundary_log_price;

    MinimumSurvey survey;
    survey.starts = options.starts;
    for (int k = 0; k < options.starts; ++k) {
        Vector x0(n);
        for (Eigen::Index i = 0; i < n; ++i) x0(i) = uniform(rng);
        const auto run = optimize::minimize_bfgs(objective, x0, min_options);
        if (run.diverged || run.x.cwiseAbs().maxCoeff() > options.boundary_log_price) {
            ++survey.boundary_escapes;
        } else if (!run.converged) {
            ++survey.unconverged;
        } else {
            const bool known = std::any_of(survey.interior_minima.begin(), survey.interior_minima.end(),
                                           [&](const Vector& x) {
                                               return (x - run.x).cwiseAbs().maxCoeff() < options.cluster_tol;
                                           });
            if (!known) survey.interior_minima.push_back(run.x);
        }
    }
    return survey;
}

}  // namespace statmicro
