#pragma once

#include "statmicro/model.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace statmicro {

enum class Boundary {
    periodic,          ///< y(t + T) = y(t)
    zero_fluctuation,  ///< y = 0 outside the window [0, T)
};

Boundary parse_boundary(const std::string& name);
std::string to_string(Boundary boundary);

/// Uniform time lattice of `n_steps` slices spaced by `dt`.
struct Lattice {
    std::size_t n_steps = 128;
    double dt = 0.1;
    Boundary boundary = Boundary::periodic;

    void validate() const;  ///< n_steps >= 8, dt > 0
};

/// Log-price fluctuations y_i(t) about the stationary point, stored as an
/// N x T matrix (row = commodity, column = time slice).
class PricePath {
public:
    PricePath() = default;
    explicit PricePath(Matrix y);
    static PricePath zeros(std::size_t n_commodities, std::size_t n_steps);

    std::size_t n_commodities() const noexcept { return static_cast<std::size_t>(y_.rows()); }
    std::size_t n_steps() const noexcept { return static_cast<std::size_t>(y_.cols()); }
    const Matrix& y() const noexcept { return y_; }
    Matrix& y() noexcept { return y_; }

    /// Prices p_i(t) = p_scale exp(xbar_i + y_i(t)) = p0_i exp(y_i(t)).
    Matrix prices(const ModelParams& params) const;

private:
    Matrix y_;
};

// Stencils. Rows are channels (or commodities); columns are time slices.
// First differences are forward, (a(t+1) - a(t))/dt; second differences are
// central, (a(t+1) - 2a(t) + a(t-1))/dt^2. On a periodic lattice both have T
// columns. With the zero-fluctuation boundary the first difference runs over
// t = -1..T-1 (T+1 columns) and the second over t = 0..T-1, so that
// D1^T D1 is the Dirichlet Laplacian L and D2^T D2 = L^2.

Matrix first_difference(const Matrix& a, const Lattice& lattice);
Matrix second_difference(const Matrix& a, const Lattice& lattice);
Matrix first_difference_adjoint(const Matrix& g, const Lattice& lattice);
Matrix second_difference_adjoint(const Matrix& g, const Lattice& lattice);

/// Lattice kinetic action
/// dt (m/2) sum_t sum_j [kappa_j (D2 a)_j(t)^2 + mu_j (D1 a)_j(t)^2], a = R y.
double kinetic_action(const ModelParams& params, const Lattice& lattice, const PricePath& path);

/// dt sum_t V(p0 e^{y(t)}), exact exponential form.
double potential_action(const ModelParams& params, const Lattice& lattice, const PricePath& path);

double total_action(const ModelParams& params, const Lattice& lattice, const PricePath& path);

/// Gaussian truncation: kinetic action + dt (m/2) sum_{i,t} gamma_i y_i(t)^2.
/// Excludes the constant dt T V0.
double quadratic_action(const ModelParams& params, const Lattice& lattice, const PricePath& path);

/// Analytic gradient of total_action with respect to every y_i(t).
Matrix action_gradient(const ModelParams& params, const Lattice& lattice, const PricePath& path);

/// Gradient of quadratic_action.
Matrix quadratic_action_gradient(const ModelParams& params, const Lattice& lattice, const PricePath& path);

/// The lattice operator of the Gaussian action applied to y:
/// m [R^T (kappa D2^T D2 + mu D1^T D1) R + diag(gamma)] y,
/// so quadratic_action = (dt/2) <y, op(y)>.
Matrix apply_quadratic_operator(const ModelParams& params, const Lattice& lattice, const Matrix& y);

// CSV: header "t,y_1,...,y_N", one row per slice, t = k dt.
void write_path_csv(std::ostream& out, const Lattice& lattice, const PricePath& path);
PricePath read_path_csv(std::istream& in, Lattice* lattice = nullptr);

// Binary: little-endian float64 stream; header N, T, dt, then y in
// time-major order (slice by slice, commodities inner).
void write_path_binary(std::ostream& out, const Lattice& lattice, const PricePath& path);
PricePath read_path_binary(std::istream& in, Lattice* lattice = nullptr);

}  // namespace statmicro
