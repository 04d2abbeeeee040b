#pragma once

#include "statmicro/model.hpp"

#include <cmath>
#include <random>

namespace helpers {

using statmicro::Matrix;
using statmicro::ModelParams;
using statmicro::Vector;

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

inline Vector log_uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    Vector v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = log_uniform(rng, lo, hi);
    return v;
}

/// Random orthogonal matrix from a QR factorisation.
inline Matrix random_rotation(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> normal;
    Matrix g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (auto& x : g.reshaped()) x = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    return qr.householderQ();
}

inline ModelParams random_params(std::mt19937_64& rng, std::size_t n, bool rotate = false) {
    ModelParams p;
    p.n_commodities = n;
    p.a = log_uniform_vector(rng, n, 0.3, 3.0);
    p.b = log_uniform_vector(rng, n, 0.3, 3.0);
    p.d = log_uniform_vector(rng, n, 0.1, 10.0);
    p.s = log_uniform_vector(rng, n, 0.1, 10.0);
    p.m = log_uniform(rng, 1.0, 1000.0);
    p.kinetic_accel = log_uniform_vector(rng, n, 0.01, 1.0);
    p.kinetic_vel = log_uniform_vector(rng, n, 0.1, 2.0);
    p.rotation = rotate ? random_rotation(rng, n) : Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    p.validate();
    return p;
}

inline double rel(double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1e-300); }

}  // namespace helpers
