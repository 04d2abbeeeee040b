#include "statmicro/optimize.hpp"

#include "statmicro/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace statmicro::optimize {

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector shares_to_point(const Vector& z, const Vector& weights, double budget) {
    const Eigen::Index n = weights.size();
    Vector logits(n);
    logits.head(n - 1) = z;
    logits(n - 1) = 0.0;
    const double top = logits.maxCoeff();
    Vector w = (logits.array() - top).exp().matrix();
    w /= w.sum();
    return (budget * w.array() / weights.array()).matrix();
}

Matrix numerical_hessian(const ScalarFn& g, const Vector& z, double h) {
    const Eigen::Index n = z.size();
    Matrix hess(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector zp = z;
        Vector zm = z;
        zp(j) += h;
        zm(j) -= h;
        hess.col(j) = (numerical_gradient(g, zp, h) - numerical_gradient(g, zm, h)) / (2.0 * h);
    }
    return 0.5 * (hess + hess.transpose());
}

}  // namespace

Vector numerical_gradient(const ScalarFn& f, const Vector& x, double h) {
    Vector grad(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = x(i);
        probe(i) = xi + 2.0 * h;
        const double f2p = f(probe);
        probe(i) = xi + h;
        const double f1p = f(probe);
        probe(i) = xi - h;
        const double f1m = f(probe);
        probe(i) = xi - 2.0 * h;
        const double f2m = f(probe);
        probe(i) = xi;
        grad(i) = (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * h);
    }
    return grad;
}

BudgetSolveResult budget_stationary_point(const ScalarFn& f, const Vector& weights, double budget,
                                          const BudgetSolveOptions& options) {
    if (weights.size() == 0 || !(budget > 0.0) || (weights.array() <= 0.0).any()) {
        throw DomainError("budget solve needs positive weights and budget");
    }
    const Eigen::Index n = weights.size();
    BudgetSolveResult result;
    if (n == 1) {
        result.x = Vector::Constant(1, budget / weights(0));
        result.value = f(result.x);
        return result;
    }

    const ScalarFn g = [&](const Vector& z) { return f(shares_to_point(z, weights, budget)); };
    constexpr double kStep = 1e-3;
    constexpr double kBoundary = 60.0;

    Vector z = Vector::Zero(n - 1);
    Vector grad = numerical_gradient(g, z, kStep);
    double merit = 0.5 * grad.squaredNorm();
    std::vector<double> trace;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        const double value = g(z);
        const double gnorm = grad.cwiseAbs().maxCoeff();
        trace.push_back(gnorm);
        if (gnorm <= options.gradient_tol * std::max(1.0, std::abs(value))) {
            result.x = shares_to_point(z, weights, budget);
            result.value = value;
            result.iterations = iter;
            result.gradient_norm = gnorm;
            return result;
        }

        const Matrix hess = numerical_hessian(g, z, kStep);
        const Matrix normal = hess.transpose() * hess;
        const Vector rhs = -hess.transpose() * grad;
        const double scale = std::max(normal.diagonal().maxCoeff(), std::numeric_limits<double>::min());

        bool accepted = false;
        for (double damping = 0.0; damping <= 1e12 * scale; damping = damping == 0.0 ? 1e-10 * scale : damping * 10.0) {
            const Matrix lhs = normal + damping * Matrix::Identity(n - 1, n - 1);
            const Vector step = lhs.ldlt().solve(rhs);
            if (!step.allFinite()) continue;
            const Vector trial = z + step;
            const Vector trial_grad = numerical_gradient(g, trial, kStep);
            const double trial_merit = 0.5 * trial_grad.squaredNorm();
            if (trial_grad.allFinite() && trial_merit < merit) {
                z = trial;
                grad = trial_grad;
                merit = trial_merit;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            throw ConvergenceError("budget-constrained solve stalled", to_std(shares_to_point(z, weights, budget)),
                                   trace);
        }
        if (z.cwiseAbs().maxCoeff() > kBoundary) {
            throw ConvergenceError("budget-constrained solve ran to the boundary of the budget set",
                                   to_std(shares_to_point(z, weights, budget)), trace);
        }
    }
    throw ConvergenceError("budget-constrained solve hit the iteration limit",
                           to_std(shares_to_point(z, weights, budget)), trace);
}

LeastSquaresResult levenberg_marquardt(const ResidualFn& residuals, Vector theta0, const LeastSquaresOptions& options) {
    LeastSquaresResult result;
    Vector theta = std::move(theta0);
    const Eigen::Index p = theta.size();
    Vector r = residuals(theta);
    if (!r.allFinite()) {
        throw FitError("residuals are not finite at the starting point", {});
    }
    double objective = 0.5 * r.squaredNorm();
    result.objective_trace.push_back(objective);
    double damping = options.initial_damping;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        Matrix jac(r.size(), p);
        for (Eigen::Index j = 0; j < p; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(theta(j)));
            Vector tp = theta;
            Vector tm = theta;
            tp(j) += h;
            tm(j) -= h;
            jac.col(j) = (residuals(tp) - residuals(tm)) / (2.0 * h);
        }
        const Vector grad = jac.transpose() * r;
        result.iterations = iter;
        result.gradient_norm = grad.cwiseAbs().maxCoeff();
        if (result.gradient_norm < options.gradient_tol) {
            result.converged = true;
            break;
        }
        const Matrix normal = jac.transpose() * jac;
        Vector diag = normal.diagonal().cwiseMax(1e-12 * std::max(1.0, normal.diagonal().maxCoeff()));

        bool accepted = false;
        while (damping < 1e16) {
            Matrix lhs = normal;
            lhs.diagonal() += damping * diag;
            const Vector step = lhs.ldlt().solve(-grad);
            const Vector trial = theta + step;
            const Vector trial_r = residuals(trial);
            const double trial_objective = 0.5 * trial_r.squaredNorm();
            if (step.allFinite() && trial_r.allFinite() && trial_objective < objective) {
                theta = trial;
                r = trial_r;
                objective = trial_objective;
                result.objective_trace.push_back(objective);
                damping = std::max(damping / 3.0, 1e-12);
                accepted = true;
                break;
            }
            damping *= 4.0;
        }
        if (!accepted) {
            // no descent at any damping: stationary to rounding
            result.converged = true;
            break;
        }
    }
    result.theta = theta;
    result.objective = objective;
    return result;
}

MinimizeResult minimize_bfgs(const ScalarFn& f, Vector x0, const MinimizeOptions& options) {
    MinimizeResult result;
    const Eigen::Index n = x0.size();
    constexpr double kStep = 1e-5;
    Vector x = std::move(x0);
    double fx = f(x);
    Vector grad = numerical_gradient(f, x, kStep);
    Matrix inv_hess = Matrix::Identity(n, n);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        result.iterations = iter;
        result.gradient_norm = grad.cwiseAbs().maxCoeff();
        if (result.gradient_norm < options.gradient_tol) {
            result.converged = true;
            break;
        }
        if (x.cwiseAbs().maxCoeff() > options.divergence_bound) {
            result.diverged = true;
            break;
        }
        Vector dir = -inv_hess * grad;
        if (dir.dot(grad) >= 0.0) {
            inv_hess.setIdentity();
            dir = -grad;
        }
        double alpha = 1.0;
        const double slope = dir.dot(grad);
        Vector trial = x + alpha * dir;
        double ft = f(trial);
        while (!(ft <= fx + 1e-4 * alpha * slope) && alpha > 1e-20) {
            alpha *= 0.5;
            trial = x + alpha * dir;
            ft = f(trial);
        }
        if (alpha <= 1e-20) {
            break;
        }
        const Vector new_grad = numerical_gradient(f, trial, kStep);
        const Vector s = trial - x;
        const Vector y = new_grad - grad;
        const double sy = s.dot(y);
        if (sy > 1e-14 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Matrix ident = Matrix::Identity(n, n);
            inv_hess = (ident - rho * s * y.transpose()) * inv_hess * (ident - rho * y * s.transpose()) +
                       rho * s * s.transpose();
        }
        x = trial;
        fx = ft;
        grad = new_grad;
    }
    if (!result.converged && !result.diverged && x.cwiseAbs().maxCoeff() > options.divergence_bound) {
        result.diverged = true;
    }
    result.x = x;
    result.value = fx;
    return result;
}

}  // namespace statmicro::optimize
