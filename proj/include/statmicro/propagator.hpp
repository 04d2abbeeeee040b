#pragma once

#include "statmicro/lattice.hpp"
#include "statmicro/model.hpp"

#include <json.hpp>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace statmicro {

enum class PropagatorMethod { continuum_residue, continuum_quadrature, lattice_fourier };

std::string to_string(PropagatorMethod method);

/// G_ij(tau) sampled on a list of lags. Values are O(1/m).
struct PropagatorTable {
    std::vector<double> lags;
    std::size_t n = 0;
    std::vector<double> g;  ///< g[(i * n + j) * lags.size() + k]
    PropagatorMethod method = PropagatorMethod::lattice_fourier;

    PropagatorTable() = default;
    PropagatorTable(std::size_t n_commodities, std::vector<double> lag_values, PropagatorMethod how);

    double& at(std::size_t i, std::size_t j, std::size_t k) { return g[(i * n + j) * lags.size() + k]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const { return g[(i * n + j) * lags.size() + k]; }

    /// N x N matrix G(lags[k]).
    Matrix at_lag(std::size_t k) const;

    /// Index of `tau` in `lags` (exact match up to 1e-9 relative); RangeError otherwise.
    std::size_t lag_index(double tau) const;
};

/// Single-channel continuum propagator
/// g(tau) = (1/m) int dw/2pi e^{i w tau} / (kappa w^4 + mu w^2 + gamma),
/// in closed form by residues. Throws DomainError unless kappa > 0, mu >= 0,
/// gamma > 0 and m > 0.
double channel_propagator(double kappa, double mu, double gamma, double m, double tau);

/// Which closed form channel_propagator uses.
enum class ResidueBranch { real_roots, complex_roots, double_root };
ResidueBranch residue_branch(double kappa, double mu, double gamma);

/// Lattice propagator on a periodic lattice by inverting, per discrete
/// frequency w_k = 2 pi k / (T dt),
///   M(w) = m [R^T diag(kappa_j w4(w) + mu_j w2(w)) R + diag(gamma)],
///   w2 = (2 - 2 cos(w dt)) / dt^2,  w4 = w2^2,
/// and summing G(n dt) = (1/(T dt)) sum_k M(w_k)^{-1} cos(2 pi k n / T).
/// Lags must be integer multiples of dt with |n| < T (RangeError otherwise).
/// With the zero-fluctuation boundary this throws UnsupportedConfiguration.
PropagatorTable matrix_propagator(const ModelParams& params, const Lattice& lattice, const std::vector<double>& lags);

/// Continuum counterpart of matrix_propagator. With R = I it evaluates the
/// residue closed form per channel; otherwise each entry of
/// (1/pi) int_0^inf dw M(w)^{-1} cos(w tau) is computed by quadrature.
PropagatorTable continuum_propagator(const ModelParams& params, const std::vector<double>& lags);

/// E[p_i] = p0_i exp(G_ii(0)).
PriceVector mean_price(const ModelParams& params, const Vector& g0_diagonal);

/// Exact lognormal moment of a Gaussian y with variance G_ii(0):
/// E[p_i] = p0_i exp(G_ii(0) / 2).
PriceVector gaussian_mean_price(const ModelParams& params, const Vector& g0_diagonal);

/// G_ij(tau) from matrix_propagator; RangeError when i, j or tau fall
/// outside the lattice.
double log_price_correlator(const ModelParams& params, const Lattice& lattice, std::size_t i, std::size_t j,
                            double tau);

/// exp(1/2 dt^2 sum_{ij} sum_{t,t'} h_i(t) G_ij(t - t') h_j(t')) for an
/// N x T source on a periodic lattice.
double gaussian_generating_functional(const ModelParams& params, const Lattice& lattice, const Matrix& source);

/// Lags 0, dt, ..., (count - 1) dt.
std::vector<double> lattice_lags(const Lattice& lattice, std::size_t count);

// CSV: header "tau,i,j,G" with 1-based indices; i major, j minor, tau ascending.
void write_propagator_csv(std::ostream& out, const PropagatorTable& table);
nlohmann::json propagator_to_json(const PropagatorTable& table);

}  // namespace statmicro
