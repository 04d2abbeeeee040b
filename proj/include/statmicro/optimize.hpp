#pragma once

#include "statmicro/model.hpp"

#include <functional>
#include <vector>

namespace statmicro::optimize {

using ScalarFn = std::function<double(const Vector&)>;
using ResidualFn = std::function<Vector(const Vector&)>;

struct BudgetSolveOptions {
    double gradient_tol = 1e-10;   ///< on the share-coordinate gradient, relative to max(1, |f|)
    int max_iterations = 200;
};

struct BudgetSolveResult {
    Vector x;          ///< positive point with sum_i weights_i x_i = budget
    double value = 0.0;
    int iterations = 0;
    double gradient_norm = 0.0;
};

/// Finds a stationary point of `f` restricted to the budget set
/// { x > 0 : sum_i weights_i x_i = budget } (the Lagrange / KKT point).
///
/// The constraint is eliminated through log expenditure shares
/// x_i = budget * w_i / weights_i with w = softmax(z, 0), and the gradient of
/// f(x(z)) is driven to zero by damped Newton steps on the gradient residual,
/// so maxima, minima and saddles on the budget set are all reachable. The
/// search starts from equal expenditure shares.
///
/// Throws ConvergenceError (carrying the last x) when the iteration stalls or
/// a share runs to the boundary.
BudgetSolveResult budget_stationary_point(const ScalarFn& f, const Vector& weights, double budget,
                                          const BudgetSolveOptions& options = {});

struct LeastSquaresOptions {
    double gradient_tol = 1e-10;
    int max_iterations = 500;
    double initial_damping = 1e-3;
};

struct LeastSquaresResult {
    Vector theta;
    double objective = 0.0;             ///< 0.5 * |r|^2
    double gradient_norm = 0.0;         ///< |J^T r|_inf
    std::vector<double> objective_trace;  ///< objective after every accepted step, starting point first
    int iterations = 0;
    bool converged = false;
};

/// Levenberg-Marquardt with a forward-difference Jacobian. Steps are only
/// accepted when they lower the objective, so `objective_trace` is
/// non-increasing. Converged when |J^T r|_inf < gradient_tol, or when no
/// damping level yields a decrease (the point is stationary to rounding).
LeastSquaresResult levenberg_marquardt(const ResidualFn& residuals, Vector theta0,
                                       const LeastSquaresOptions& options = {});

struct MinimizeOptions {
    double gradient_tol = 1e-9;
    int max_iterations = 2000;
    double divergence_bound = 40.0;  ///< stop once any |x_i| exceeds this
};

struct MinimizeResult {
    Vector x;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    bool diverged = false;
};

/// BFGS with central-difference gradients and Armijo backtracking.
MinimizeResult minimize_bfgs(const ScalarFn& f, Vector x0, const MinimizeOptions& options = {});

/// Fourth-order central-difference gradient.
Vector numerical_gradient(const ScalarFn& f, const Vector& x, double h);

}  // namespace statmicro::optimize
