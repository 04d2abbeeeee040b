#pragma once
// Reference computations written independently of the library internals.

#include "statmicro/lattice.hpp"
#include "statmicro/model.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using statmicro::Matrix;
using statmicro::Vector;

/// Golden-section search for the minimum of a unimodal f on [lo, hi].
inline long double golden_section(const std::function<long double(long double)>& f, long double lo, long double hi,
                                  int iterations = 200) {
    const long double r = (std::sqrt(5.0L) - 1.0L) / 2.0L;
    long double x1 = hi - r * (hi - lo);
    long double x2 = lo + r * (hi - lo);
    long double f1 = f(x1);
    long double f2 = f(x2);
    for (int k = 0; k < iterations && hi - lo > 1e-15L; ++k) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    return (lo + hi) / 2.0L;
}

/// Fourth-order central differences in long double.
inline long double derivative(const std::function<long double(long double)>& f, long double x, long double h = 1e-3L) {
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h);
}

inline long double second_derivative(const std::function<long double(long double)>& f, long double x,
                                     long double h = 1e-3L) {
    return (-f(x - 2 * h) + 16 * f(x - h) - 30 * f(x) + 16 * f(x + h) - f(x + 2 * h)) / (12 * h * h);
}

/// Golden section to bracket, then Newton on the finite-difference derivative.
inline long double minimize_1d(const std::function<long double(long double)>& f, long double lo, long double hi) {
    long double x = golden_section(f, lo, hi, 80);
    for (int k = 0; k < 30; ++k) {
        const long double step = derivative(f, x) / second_derivative(f, x);
        x -= step;
        if (std::fabs(step) < 1e-16L * (1.0L + std::fabs(x))) break;
    }
    return x;
}

/// Bisection for a sign change of f on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iterations = 200) {
    double flo = f(lo);
    for (int k = 0; k < iterations; ++k) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// (1/(pi m)) int_0^inf cos(w tau) / (kappa w^4 + mu w^2 + gamma) dw by
/// adaptive Gauss-Kronrod on unit intervals up to w_max plus the
/// leading asymptotic tail.
inline double channel_quadrature(double kappa, double mu, double gamma, double m, double tau, double w_max = 2000.0) {
    using boost::math::quadrature::gauss_kronrod;
    const auto f = [&](double w) { return std::cos(w * tau) / (kappa * w * w * w * w + mu * w * w + gamma); };
    double sum = 0.0;
    const double width = tau > 0 ? std::min(1.0, 3.14159265358979 / tau) : 1.0;
    for (double lo = 0.0; lo < w_max; lo += width) {
        sum += gauss_kronrod<double, 31>::integrate(f, lo, std::min(lo + width, w_max), 8, 1e-14);
    }
    if (tau == 0.0) {
        sum += 1.0 / (3.0 * kappa * w_max * w_max * w_max);
    } else {
        sum += -std::sin(w_max * tau) / (tau * kappa * std::pow(w_max, 4));
    }
    return sum / (3.14159265358979323846 * m);
}

/// Dense matrix of the Gaussian lattice operator, ordered (i, t) -> i * T + t.
inline Matrix dense_operator(const statmicro::ModelParams& params, const statmicro::Lattice& lattice) {
    const auto N = static_cast<Eigen::Index>(params.n_commodities);
    const auto T = static_cast<Eigen::Index>(lattice.n_steps);
    const double e = lattice.dt;
    // stencil matrices built directly from their definitions
    const bool periodic = lattice.boundary == statmicro::Boundary::periodic;
    const Eigen::Index cols1 = periodic ? T : T + 1;
    Matrix D1 = Matrix::Zero(cols1, T);
    for (Eigen::Index r = 0; r < cols1; ++r) {
        if (periodic) {
            D1(r, (r + 1) % T) += 1.0 / e;
            D1(r, r) -= 1.0 / e;
        } else {
            const Eigen::Index t = r - 1;  // difference between slices t and t + 1
            if (t + 1 < T) D1(r, t + 1) += 1.0 / e;
            if (t >= 0) D1(r, t) -= 1.0 / e;
        }
    }
    Matrix D2 = Matrix::Zero(T, T);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (int s : {-1, 0, 1}) {
            Eigen::Index u = t + s;
            if (periodic) {
                u = (u + T) % T;
            } else if (u < 0 || u >= T) {
                continue;
            }
            D2(t, u) += (s == 0 ? -2.0 : 1.0) / (e * e);
        }
    }
    const Matrix K1 = D1.transpose() * D1;
    const Matrix K2 = D2.transpose() * D2;
    const Vector gamma = statmicro::gamma_coefficients(params);
    Matrix op = Matrix::Zero(N * T, N * T);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index k = 0; k < N; ++k) {
            double w2 = 0.0;
            double w1 = 0.0;
            for (Eigen::Index j = 0; j < N; ++j) {
                const double rr = params.rotation(j, i) * params.rotation(j, k);
                w2 += params.kinetic_accel(j) * rr;
                w1 += params.kinetic_vel(j) * rr;
            }
            op.block(i * T, k * T, T, T) = w2 * K2 + w1 * K1;
        }
        op.block(i * T, i * T, T, T) += gamma(i) * Matrix::Identity(T, T);
    }
    return params.m * op;
}

/// Covariance of y under exp(-(dt/2) <y, op y>).
inline Matrix dense_covariance(const statmicro::ModelParams& params, const statmicro::Lattice& lattice) {
    return (lattice.dt * dense_operator(params, lattice)).inverse();
}

/// Stationary Gaussian series of length T with spacing dt whose periodic
/// covariance has spectrum 1 / (m (kappa w^4 + mu w^2 + gamma)), by
/// colouring white noise in Fourier space.
inline std::vector<double> spectral_series(double kappa, double mu, double gamma, double m, std::size_t T, double dt,
                                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> white(T);
    for (auto& v : white) v = normal(rng);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, white);
    const double pi = 3.14159265358979323846;
    for (std::size_t k = 0; k < T; ++k) {
        const double kk = k <= T / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(T);
        const double w = 2.0 * pi * kk / (static_cast<double>(T) * dt);
        const double s = 1.0 / (m * (kappa * w * w * w * w + mu * w * w + gamma));
        spec[k] *= std::sqrt(s / dt);
    }
    std::vector<double> out;
    fft.inv(out, spec);
    return out;
}

}  // namespace oracle
