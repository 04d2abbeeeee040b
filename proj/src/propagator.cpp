#include "statmicro/propagator.hpp"

#include "statmicro/errors.hpp"
#include "statmicro/parallel.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace statmicro {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Below this |mu^2 - 4 kappa gamma| / (mu^2 + 4 kappa gamma) the two root
// pairs are treated as one double root.
constexpr double kDegenerateThreshold = 1e-12;

bool is_identity(const Matrix& r) { return r.isIdentity(0.0); }

long lag_steps(const Lattice& lattice, double tau) {
    const double ratio = tau / lattice.dt;
    const double steps = std::round(ratio);
    if (!std::isfinite(ratio) || std::abs(ratio - steps) > 1e-9 * std::max(1.0, std::abs(ratio))) {
        std::ostringstream os;
        os << "lag " << tau << " is not a multiple of dt = " << lattice.dt;
        throw RangeError(os.str());
    }
    if (std::abs(steps) >= static_cast<double>(lattice.n_steps)) {
        std::ostringstream os;
        os << "lag " << tau << " is outside the lattice of " << lattice.n_steps << " slices";
        throw RangeError(os.str());
    }
    return static_cast<long>(steps);
}

void require_periodic(const Lattice& lattice) {
    if (lattice.boundary != Boundary::periodic) {
        throw UnsupportedConfiguration("the Fourier propagator needs a periodic lattice");
    }
}

Matrix frequency_matrix(const ModelParams& params, double w4, double w2, const Vector& gamma) {
    const Vector channel = (params.kinetic_accel * w4 + params.kinetic_vel * w2).eval();
    Matrix out = params.rotation.transpose() * channel.asDiagonal() * params.rotation;
    out.diagonal() += gamma;
    return params.m * out;
}

}  // namespace

std::string to_string(PropagatorMethod method) {
    switch (method) {
        case PropagatorMethod::continuum_residue: return "continuum-residue";
        case PropagatorMethod::continuum_quadrature: return "continuum-quadrature";
        case PropagatorMethod::lattice_fourier: return "lattice-fourier";
    }
    return "unknown";
}

PropagatorTable::PropagatorTable(std::size_t n_commodities, std::vector<double> lag_values, PropagatorMethod how)
    : lags(std::move(lag_values)), n(n_commodities), g(n_commodities * n_commodities * lags.size(), 0.0),
      method(how) {}

Matrix PropagatorTable::at_lag(std::size_t k) const {
    if (k >= lags.size()) throw RangeError("lag index out of range");
    Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = at(i, j, k);
    }
    return out;
}

std::size_t PropagatorTable::lag_index(double tau) const {
    for (std::size_t k = 0; k < lags.size(); ++k) {
        if (std::abs(lags[k] - tau) <= 1e-9 * std::max(1.0, std::abs(tau))) return k;
    }
    std::ostringstream os;
    os << "lag " << tau << " is not in the table";
    throw RangeError(os.str());
}

ResidueBranch residue_branch(double kappa, double mu, double gamma) {
    const double disc = mu * mu - 4.0 * kappa * gamma;
    if (std::abs(disc) <= kDegenerateThreshold * (mu * mu + 4.0 * kappa * gamma)) return ResidueBranch::double_root;
    return disc > 0.0 ? ResidueBranch::real_roots : ResidueBranch::complex_roots;
}

double channel_propagator(double kappa, double mu, double gamma, double m, double tau) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw DomainError("channel propagator needs kappa > 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("channel propagator needs gamma > 0 (massless channel)");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw DomainError("channel propagator needs mu >= 0");
    if (!(m > 0.0)) throw DomainError("channel propagator needs m > 0");
    const double t = std::abs(tau);

    switch (residue_branch(kappa, mu, gamma)) {
        case ResidueBranch::real_roots: {
            const double root = std::sqrt(mu * mu - 4.0 * kappa * gamma);
            const double r1 = std::sqrt(2.0 * gamma / (mu + root));
            const double r2 = std::sqrt((mu + root) / (2.0 * kappa));
            return (std::exp(-r1 * t) / (2.0 * r1) - std::exp(-r2 * t) / (2.0 * r2)) / (m * root);
        }
        case ResidueBranch::complex_roots: {
            const double omega = std::pow(gamma / kappa, 0.25);
            const double theta = std::acos(mu / (2.0 * std::sqrt(kappa * gamma)));
            const double half = 0.5 * theta;
            return std::exp(-omega * t * std::cos(half)) * std::sin(half + omega * t * std::sin(half)) /
                   (2.0 * omega * omega * omega * std::sin(theta) * m * kappa);
        }
        case ResidueBranch::double_root: {
            const double omega = std::sqrt(mu / (2.0 * kappa));
            return (1.0 + omega * t) * std::exp(-omega * t) / (4.0 * omega * omega * omega * m * kappa);
        }
    }
    return 0.0;
}

PropagatorTable matrix_propagator(const ModelParams& params, const Lattice& lattice, const std::vector<double>& lags) {
    params.validate();
    lattice.validate();
    require_periodic(lattice);
    std::vector<long> steps;
    steps.reserve(lags.size());
    for (double tau : lags) steps.push_back(lag_steps(lattice, tau));

    const auto N = static_cast<Eigen::Index>(params.n_commodities);
    const std::size_t T = lattice.n_steps;
    const double dt = lattice.dt;
    const Vector gamma = gamma_coefficients(params);

    // M(w_k) = M(w_{T-k}), so only k = 0..T/2 are inverted.
    const std::size_t half = T / 2 + 1;
    std::vector<Matrix> inverses(half);
    parallel_for(half, [&](std::size_t k) {
        const double w2 = (2.0 - 2.0 * std::cos(2.0 * kPi * static_cast<double>(k) / static_cast<double>(T))) / (dt * dt);
        const Matrix mk = frequency_matrix(params, w2 * w2, w2, gamma);
        Eigen::LLT<Matrix> llt(mk);
        if (llt.info() != Eigen::Success) throw LinearAlgebraError("frequency matrix is not positive definite");
        inverses[k] = llt.solve(Matrix::Identity(N, N));
    });

    PropagatorTable table(params.n_commodities, lags, PropagatorMethod::lattice_fourier);
    parallel_for(lags.size(), [&](std::size_t idx) {
        const auto n = static_cast<std::size_t>(std::abs(steps[idx])) % T;
        Matrix sum = Matrix::Zero(N, N);
        for (std::size_t k = 0; k < T; ++k) {
            const std::size_t kk = k < half ? k : T - k;
            const double phase = 2.0 * kPi * static_cast<double>((k * n) % T) / static_cast<double>(T);
            sum += std::cos(phase) * inverses[kk];
        }
        sum /= static_cast<double>(T) * dt;
        for (Eigen::Index i = 0; i < N; ++i) {
            for (Eigen::Index j = 0; j < N; ++j) {
                table.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), idx) = 0.5 * (sum(i, j) + sum(j, i));
            }
        }
    });
    return table;
}

PropagatorTable continuum_propagator(const ModelParams& params, const std::vector<double>& lags) {
    params.validate();
    const std::size_t n = params.n_commodities;
    const Vector gamma = gamma_coefficients(params);

    if (is_identity(params.rotation)) {
        PropagatorTable table(n, lags, PropagatorMethod::continuum_residue);
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            for (std::size_t k = 0; k < lags.size(); ++k) {
                table.at(i, i, k) = channel_propagator(params.kinetic_accel(ii), params.kinetic_vel(ii), gamma(ii),
                                                       params.m, lags[k]);
            }
        }
        return table;
    }

    PropagatorTable table(n, lags, PropagatorMethod::continuum_quadrature);
    const auto entry = [&](std::size_t i, std::size_t j) {
        return [&, i, j](double w) {
            // beyond this the entry is below 1e-120 and w^4 would overflow
            if (w > 1e30) return 0.0;
            const Matrix mw = frequency_matrix(params, w * w * w * w, w * w, gamma);
            const Matrix inv = mw.llt().solve(Matrix::Identity(mw.rows(), mw.cols()));
            return inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        };
    };
    boost::math::quadrature::ooura_fourier_cos<double> cosine;
    boost::math::quadrature::exp_sinh<double> half_line;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const auto f = entry(i, j);
            for (std::size_t k = 0; k < lags.size(); ++k) {
                const double t = std::abs(lags[k]);
                const double integral = t == 0.0 ? half_line.integrate(f) : cosine.integrate(f, t).first;
                table.at(i, j, k) = integral / kPi;
                table.at(j, i, k) = integral / kPi;
            }
        }
    }
    return table;
}

PriceVector mean_price(const ModelParams& params, const Vector& g0_diagonal) {
    const Vector p0 = stationary_prices(params).values();
    if (g0_diagonal.size() != p0.size()) throw DomainError("G(0) diagonal has the wrong length");
    return PriceVector((p0.array() * g0_diagonal.array().exp()).matrix());
}

PriceVector gaussian_mean_price(const ModelParams& params, const Vector& g0_diagonal) {
    return mean_price(params, 0.5 * g0_diagonal);
}

double log_price_correlator(const ModelParams& params, const Lattice& lattice, std::size_t i, std::size_t j,
                            double tau) {
    if (i >= params.n_commodities || j >= params.n_commodities) {
        throw RangeError("commodity index out of range");
    }
    const auto table = matrix_propagator(params, lattice, {tau});
    return table.at(i, j, 0);
}

double gaussian_generating_functional(const ModelParams& params, const Lattice& lattice, const Matrix& source) {
    if (static_cast<std::size_t>(source.rows()) != params.n_commodities ||
        static_cast<std::size_t>(source.cols()) != lattice.n_steps) {
        throw DomainError("source must be N x T");
    }
    if (source.isZero(0.0)) return 1.0;
    const std::size_t T = lattice.n_steps;
    const auto table = matrix_propagator(params, lattice, lattice_lags(lattice, T));
    const auto N = source.rows();
    std::vector<Matrix> g(T);
    for (std::size_t k = 0; k < T; ++k) g[k] = table.at_lag(k);

    double quad = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const Vector ht = source.col(static_cast<Eigen::Index>(t));
        if (ht.isZero(0.0)) continue;
        Vector acc = Vector::Zero(N);
        for (std::size_t u = 0; u < T; ++u) {
            const auto hu = source.col(static_cast<Eigen::Index>(u));
            acc += g[(t + T - u) % T] * hu;
        }
        quad += ht.dot(acc);
    }
    return std::exp(0.5 * lattice.dt * lattice.dt * quad);
}

std::vector<double> lattice_lags(const Lattice& lattice, std::size_t count) {
    std::vector<double> lags(count);
    for (std::size_t k = 0; k < count; ++k) lags[k] = static_cast<double>(k) * lattice.dt;
    return lags;
}

void write_propagator_csv(std::ostream& out, const PropagatorTable& table) {
    std::vector<std::size_t> order(table.lags.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return table.lags[x] < table.lags[y]; });
    out << "tau,i,j,G\n" << std::setprecision(17);
    for (std::size_t i = 0; i < table.n; ++i) {
        for (std::size_t j = 0; j < table.n; ++j) {
            for (std::size_t k : order) {
                out << table.lags[k] << "," << (i + 1) << "," << (j + 1) << "," << table.at(i, j, k) << "\n";
            }
        }
    }
}

nlohmann::json propagator_to_json(const PropagatorTable& table) {
    nlohmann::json g = nlohmann::json::array();
    for (std::size_t i = 0; i < table.n; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < table.n; ++j) {
            nlohmann::json series = nlohmann::json::array();
            for (std::size_t k = 0; k < table.lags.size(); ++k) series.push_back(table.at(i, j, k));
            row.push_back(std::move(series));
        }
        g.push_back(std::move(row));
    }
    return {{"method", to_string(table.method)}, {"n_commodities", table.n}, {"lags", table.lags}, {"g", g}};
}

}  // namespace statmicro
