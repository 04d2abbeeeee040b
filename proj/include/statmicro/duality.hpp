#pragma once

#include "statmicro/model.hpp"
#include "statmicro/optimize.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace statmicro {

/// Producer cost model C(q) = sum_i b_i/(1+b_i) beta_i q_i^{1+1/b_i} and the
/// supply aggregation weights alpha_i of F(q) = 1/2 sum_i alpha_i q_i.
struct CostParams {
    Vector beta;
    Vector b;
    Vector alpha;

    void validate() const;

    /// Cost model tied to `params` through alpha_i = m s_i beta_i^{b_i}, which
    /// makes the profit-maximising supply equal the model supply function.
    static CostParams linked(const ModelParams& params, Vector beta);
};

struct MarketClearing {
    QuantityVector q_star;
    PriceVector p_star;
    double expenditure = 0.0;  ///< sum_i p*_i q*_i, equals m at the solution
    double residual = 0.0;     ///< max_i |ln p_demand_i - ln p_supply_i|
    int iterations = 0;
};

struct DemandSolution {
    QuantityVector q;   ///< utility-maximising bundle on the budget line
    double demand = 0.0;  ///< utility at q, i.e. the demand at the given prices
};

struct DualPriceSolution {
    PriceVector p;       ///< stationary prices of the demand on the budget set
    double utility = 0.0;  ///< demand evaluated there
};

using UtilityFn = std::function<double(const QuantityVector&)>;

/// Demand from a utility: the KKT point of U(q) on sum_i p_i q_i = m.
/// Throws ConvergenceError carrying the last iterate.
DemandSolution demand_from_utility(const UtilityFn& utility, const PriceVector& p, double m,
                                   const optimize::BudgetSolveOptions& options = {});

/// Utility from the model demand: the demand at its stationary point over
/// prices on sum_i p_i q_i = m, found numerically. Requires a common a.
double utility_from_demand(const ModelParams& params, const QuantityVector& q);
DualPriceSolution solve_dual_prices(const ModelParams& params, const QuantityVector& q);

/// Closed form of the dual prices for a common exponent a:
/// pbar_i = C (d_i/q_i)^{1/(a+1)}, C = m / sum_j d_j^{1/(a+1)} q_j^{a/(a+1)}.
PriceVector dual_prices(const ModelParams& params, const QuantityVector& q);

/// Profit-maximising output q_i = (p_i / beta_i)^{b_i}.
QuantityVector supply_from_profit(const CostParams& cost, const PriceVector& p);

/// Revenue minus cost.
double profit(const CostParams& cost, const PriceVector& p, const QuantityVector& q);

/// Aggregate supply 1/2 sum_i alpha_i q_i.
double aggregate_supply(const CostParams& cost, const QuantityVector& q);

struct MarketClearingOptions {
    double damping = 0.5;
    int max_iterations = 10000;
    double tolerance = 1e-10;
};

/// Quantities and prices where the dual demand price meets the producer
/// supply price beta_i q_i^{1/b_i}, by damped fixed-point iteration in ln q.
MarketClearing market_clearing(const ModelParams& params, const CostParams& cost,
                               const MarketClearingOptions& options = {});

/// Demand implied by the quadratic utility 1/2 q.M.q + h_lin.q:
/// 1/2 (m + p.M^-1.h)^2 / (p.M^-1.p) - 1/2 h.M^-1.h.
/// Throws LinearAlgebraError unless M is symmetric positive definite.
double quadratic_demand(const Matrix& M, const Vector& h_lin, const PriceVector& p, double m);

/// Stationary bundle of the quadratic utility, M^-1 (zeta p - h_lin) with
/// zeta = (m + p.M^-1.h) / (p.M^-1.p). Entries may be non-positive.
Vector quadratic_demand_bundle(const Matrix& M, const Vector& h_lin, const PriceVector& p, double m);

double quadratic_utility(const Matrix& M, const Vector& h_lin, const Vector& q);

/// Potential made of the quadratic-utility demand plus the model supply.
class QuadraticDemandPotential final : public PotentialModel {
public:
    QuadraticDemandPotential(Matrix M, Vector h_lin, ModelParams supply_params);
    std::size_t size() const override { return supply_params_.n_commodities; }
    double demand(const PriceVector& p) const override;
    double supply(const PriceVector& p) const override;

private:
    Matrix M_;
    Vector h_lin_;
    ModelParams supply_params_;
};

struct MinimumSurvey {
    std::vector<Vector> interior_minima;  ///< distinct converged minima, in log-price
    int boundary_escapes = 0;             ///< runs that left every bounded region
    int unconverged = 0;
    int starts = 0;

    bool unique_interior_minimum() const {
        return interior_minima.size() == 1 && boundary_escapes == 0 && unconverged == 0;
    }
};

struct SurveyOptions {
    int starts = 50;
    std::uint64_t seed = 1;
    double start_spread = 2.0;     ///< starts drawn uniformly in [-spread, spread] log-price
    double boundary_log_price = 15.0;
    double cluster_tol = 1e-4;
};

/// Minimises the potential in log-price from random starts and classifies
/// where each run ends up.
MinimumSurvey survey_minima(const PotentialModel& model, const SurveyOptions& options = {});

}  // namespace statmicro
