#include "statmicro/lattice.hpp"

#include "statmicro/errors.hpp"

#include "csv.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace statmicro {

namespace {

void check_shapes(const ModelParams& params, const Lattice& lattice, const PricePath& path) {
    lattice.validate();
    if (path.n_commodities() != params.n_commodities || path.n_steps() != lattice.n_steps) {
        std::ostringstream os;
        os << "path is " << path.n_commodities() << " x " << path.n_steps() << ", expected "
           << params.n_commodities << " x " << lattice.n_steps;
        throw DomainError(os.str());
    }
    if (!path.y().allFinite()) {
        throw DomainError("path contains non-finite entries");
    }
}

// d_i p0_i^{-a_i} and s_i p0_i^{b_i}: the demand and supply weights of V in y.
std::pair<Vector, Vector> potential_weights(const ModelParams& params) {
    const Vector p0 = stationary_prices(params).values();
    Vector demand_w = (params.d.array() * p0.array().pow(-params.a.array())).matrix();
    Vector supply_w = (params.s.array() * p0.array().pow(params.b.array())).matrix();
    return {std::move(demand_w), std::move(supply_w)};
}

Matrix kinetic_operator(const ModelParams& params, const Lattice& lattice, const Matrix& y) {
    const Matrix a = params.rotation * y;
    const Matrix accel = second_difference_adjoint(second_difference(a, lattice), lattice);
    const Matrix vel = first_difference_adjoint(first_difference(a, lattice), lattice);
    const Matrix channel = params.kinetic_accel.asDiagonal() * accel + params.kinetic_vel.asDiagonal() * vel;
    return params.rotation.transpose() * channel;
}

void write_le_double(std::ostream& out, double value) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
}

double read_le_double(std::istream& in) {
    char bytes[8];
    if (!in.read(bytes, 8)) {
        throw ValidationError("binary path block is truncated");
    }
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    return std::bit_cast<double>(bits);
}

double parse_number(const std::string& cell, int row, const std::string& column) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw SchemaError("row " + std::to_string(row) + ", column '" + column + "': not a number: '" + cell + "'",
                          row, column);
    }
}

}  // namespace

Boundary parse_boundary(const std::string& name) {
    if (name == "periodic") return Boundary::periodic;
    if (name == "zero-fluctuation" || name == "zero_fluctuation") return Boundary::zero_fluctuation;
    throw ValidationError("unknown boundary '" + name + "' (expected periodic or zero-fluctuation)", "boundary");
}

std::string to_string(Boundary boundary) {
    return boundary == Boundary::periodic ? "periodic" : "zero-fluctuation";
}

void Lattice::validate() const {
    if (n_steps < 8) throw ValidationError("lattice needs n_steps >= 8", "n_steps");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("lattice spacing dt must be > 0", "dt");
}

PricePath::PricePath(Matrix y) : y_(std::move(y)) {}

PricePath PricePath::zeros(std::size_t n_commodities, std::size_t n_steps) {
    return PricePath(Matrix::Zero(static_cast<Eigen::Index>(n_commodities), static_cast<Eigen::Index>(n_steps)));
}

Matrix PricePath::prices(const ModelParams& params) const {
    const Vector p0 = stationary_prices(params).values();
    return (y_.array().exp().colwise() * p0.array()).matrix();
}

Matrix first_difference(const Matrix& a, const Lattice& lattice) {
    const Eigen::Index T = a.cols();
    const double inv = 1.0 / lattice.dt;
    if (lattice.boundary == Boundary::periodic) {
        Matrix out(a.rows(), T);
        for (Eigen::Index t = 0; t < T; ++t) {
            out.col(t) = (a.col((t + 1) % T) - a.col(t)) * inv;
        }
        return out;
    }
    Matrix out(a.rows(), T + 1);
    out.col(0) = a.col(0) * inv;
    for (Eigen::Index t = 0; t + 1 < T; ++t) {
        out.col(t + 1) = (a.col(t + 1) - a.col(t)) * inv;
    }
    out.col(T) = -a.col(T - 1) * inv;
    return out;
}

Matrix first_difference_adjoint(const Matrix& g, const Lattice& lattice) {
    const double inv = 1.0 / lattice.dt;
    if (lattice.boundary == Boundary::periodic) {
        const Eigen::Index T = g.cols();
        Matrix out(g.rows(), T);
        for (Eigen::Index t = 0; t < T; ++t) {
            out.col(t) = (g.col((t + T - 1) % T) - g.col(t)) * inv;
        }
        return out;
    }
    const Eigen::Index T = g.cols() - 1;
    Matrix out(g.rows(), T);
    for (Eigen::Index t = 0; t < T; ++t) {
        out.col(t) = (g.col(t) - g.col(t + 1)) * inv;
    }
    return out;
}

Matrix second_difference(const Matrix& a, const Lattice& lattice) {
    const Eigen::Index T = a.cols();
    const double inv = 1.0 / (lattice.dt * lattice.dt);
    Matrix out(a.rows(), T);
    const bool periodic = lattice.boundary == Boundary::periodic;
    for (Eigen::Index t = 0; t < T; ++t) {
        Vector prev = t > 0 ? Vector(a.col(t - 1)) : (periodic ? Vector(a.col(T - 1)) : Vector::Zero(a.rows()));
        Vector next = t + 1 < T ? Vector(a.col(t + 1)) : (periodic ? Vector(a.col(0)) : Vector::Zero(a.rows()));
        out.col(t) = (next - 2.0 * a.col(t) + prev) * inv;
    }
    return out;
}

Matrix second_difference_adjoint(const Matrix& g, const Lattice& lattice) {
    // the central second difference is symmetric under both boundaries
    return second_difference(g, lattice);
}

double kinetic_action(const ModelParams& params, const Lattice& lattice, const PricePath& path) {
    check_shapes(params, lattice, path);
    const Matrix a = params.rotation * path.y();
    const Matrix accel = second_difference(a, lattice);
    const Matrix vel = first_difference(a, lattice);
    const double sum = params.kinetic_accel.dot(accel.rowwise().squaredNorm()) +
                       params.kinetic_vel.dot(vel.rowwise().squaredNorm());
    return 0.5 * params.m * lattice.dt * sum;
}

double potential_action(const ModelParams& params, const Lattice& lattice, const PricePath& path) {
    check_shapes(params, lattice, path);
    const auto [demand_w, supply_w] = potential_weights(params);
    const Matrix& y = path.y();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        sum += demand_w(i) * (-params.a(i) * y.row(i).array()).exp().sum() +
               supply_w(i) * (params.b(i) * y.row(i).array()).exp().sum();
    }
    return 0.5 * params.m * lattice.dt * sum;
}

double total_action(const ModelParams& params, const Lattice& lattice, const PricePath& path) {
    return kinetic_action(params, lattice, path) + potential_action(params, lattice, path);
}

double quadratic_action(const ModelParams& params, const Lattice& lattice, const PricePath& path) {
    const Vector gamma = gamma_coefficients(params);
    const double mass = gamma.dot(path.y().rowwise().squaredNorm());
    return kinetic_action(params, lattice, path) + 0.5 * params.m * lattice.dt * mass;
}

Matrix action_gradient(const ModelParams& params, const Lattice& lattice, const PricePath& path) {
    check_shapes(params, lattice, path);
    const auto [demand_w, supply_w] = potential_weights(params);
    const Matrix& y = path.y();
    Matrix grad = params.m * lattice.dt * kinetic_operator(params, lattice, y);
    const double scale = 0.5 * params.m * lattice.dt;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const double a = params.a(i);
        const double b = params.b(i);
        grad.row(i).array() += scale * (-a * demand_w(i) * (-a * y.row(i).array()).exp() +
                                        b * supply_w(i) * (b * y.row(i).array()).exp());
    }
    return grad;
}

Matrix quadratic_action_gradient(const ModelParams& params, const Lattice& lattice, const PricePath& path) {
    check_shapes(params, lattice, path);
    return lattice.dt * apply_quadratic_operator(params, lattice, path.y());
}

Matrix apply_quadratic_operator(const ModelParams& params, const Lattice& lattice, const Matrix& y) {
    const Vector gamma = gamma_coefficients(params);
    return params.m * (kinetic_operator(params, lattice, y) + gamma.asDiagonal() * y);
}

void write_path_csv(std::ostream& out, const Lattice& lattice, const PricePath& path) {
    out << "t";
    for (std::size_t i = 0; i < path.n_commodities(); ++i) out << ",y_" << (i + 1);
    out << "\n" << std::setprecision(17);
    for (std::size_t t = 0; t < path.n_steps(); ++t) {
        out << static_cast<double>(t) * lattice.dt;
        for (std::size_t i = 0; i < path.n_commodities(); ++i) {
            out << "," << path.y()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
        }
        out << "\n";
    }
}

PricePath read_path_csv(std::istream& in, Lattice* lattice) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty path CSV", 1);
    const auto header = detail::split_csv(line);
    if (header.size() < 2 || header[0] != "t") {
        throw SchemaError("path CSV header must be 't,y_1,...,y_N'", 1, header.empty() ? "" : header[0]);
    }
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i] != "y_" + std::to_string(i)) {
            throw SchemaError("unexpected path CSV column '" + header[i] + "'", 1, header[i]);
        }
    }
    const std::size_t n = header.size() - 1;
    std::vector<double> times;
    std::vector<double> values;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::blank(line)) continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != header.size()) {
            throw SchemaError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                  " columns, expected " + std::to_string(header.size()),
                              row);
        }
        times.push_back(parse_number(cells[0], row, "t"));
        for (std::size_t i = 1; i < cells.size(); ++i) values.push_back(parse_number(cells[i], row, header[i]));
    }
    const std::size_t T = times.size();
    Matrix y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = values[t * n + i];
        }
    }
    if (lattice != nullptr) {
        lattice->n_steps = T;
        if (T >= 2) lattice->dt = times[1] - times[0];
        lattice->validate();
    }
    return PricePath(std::move(y));
}

void write_path_binary(std::ostream& out, const Lattice& lattice, const PricePath& path) {
    write_le_double(out, static_cast<double>(path.n_commodities()));
    write_le_double(out, static_cast<double>(path.n_steps()));
    write_le_double(out, lattice.dt);
    for (Eigen::Index t = 0; t < path.y().cols(); ++t) {
        for (Eigen::Index i = 0; i < path.y().rows(); ++i) write_le_double(out, path.y()(i, t));
    }
}

PricePath read_path_binary(std::istream& in, Lattice* lattice) {
    const double n_raw = read_le_double(in);
    const double t_raw = read_le_double(in);
    const double dt = read_le_double(in);
    if (!(n_raw >= 1.0) || !(t_raw >= 1.0) || n_raw != std::floor(n_raw) || t_raw != std::floor(t_raw) ||
        n_raw > 1e6 || t_raw > 1e9) {
        throw ValidationError("binary path header has invalid N or T");
    }
    const auto n = static_cast<Eigen::Index>(n_raw);
    const auto T = static_cast<Eigen::Index>(t_raw);
    Matrix y(n, T);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) y(i, t) = read_le_double(in);
    }
    if (lattice != nullptr) {
        lattice->n_steps = static_cast<std::size_t>(T);
        lattice->dt = dt;
        lattice->validate();
    }
    return PricePath(std::move(y));
}

}  // namespace statmicro
