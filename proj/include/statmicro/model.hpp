#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <string>

namespace statmicro {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Vector whose entries are all strictly positive and finite. The tag keeps
/// prices and quantities from being mixed up.
template <class Tag>
class PositiveVector {
public:
    PositiveVector() = default;
    explicit PositiveVector(Vector values);
    PositiveVector(std::initializer_list<double> values);

    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
    double operator[](std::size_t i) const { return values_(static_cast<Eigen::Index>(i)); }
    const Vector& values() const noexcept { return values_; }

private:
    Vector values_;
};

struct PriceTag {};
struct QuantityTag {};

/// Commodity prices in currency units per commodity unit.
using PriceVector = PositiveVector<PriceTag>;
/// Commodity quantities in commodity units.
using QuantityVector = PositiveVector<QuantityTag>;

/// Parameters of the power-law demand/supply model together with the kinetic
/// couplings of the price dynamics.
///
/// Demand is (m/2) sum_i d_i p_i^{-a_i}, supply is (m/2) sum_i s_i p_i^{b_i}.
/// The kinetic term couples log-price accelerations and velocities through
/// L = R^T diag(kinetic_accel) R and L~ = R^T diag(kinetic_vel) R, where R is
/// `rotation`.
struct ModelParams {
    std::size_t n_commodities = 0;
    Vector a;               ///< demand exponents, > 0
    Vector b;               ///< supply exponents, > 0
    Vector d;               ///< demand coefficients, > 0
    Vector s;               ///< supply coefficients, > 0
    double m = 1.0;         ///< budget, > 0
    double p_scale = 1.0;   ///< reference price, > 0
    Vector kinetic_accel;   ///< acceleration weights kappa_j, > 0
    Vector kinetic_vel;     ///< velocity weights mu_j, >= 0
    Matrix rotation;        ///< orthogonal channel rotation

    /// Throws ValidationError naming the first offending field.
    void validate() const;

    bool uniform_demand_exponent() const;

    /// Identical commodities with identity rotation.
    static ModelParams uniform(std::size_t n, double a, double b, double d, double s, double m,
                               double kappa = 1.0, double mu = 1.0);
};

/// Budget-weighted demand function; strictly decreasing in every price.
double demand(const ModelParams& params, const PriceVector& p);

/// Budget-weighted supply function; strictly increasing in every price.
double supply(const ModelParams& params, const PriceVector& p);

/// Microeconomic potential V = demand + supply.
double potential(const ModelParams& params, const PriceVector& p);

/// Unique minimiser p0 of the potential, p0_i = (a_i d_i / (b_i s_i))^{1/(a_i+b_i)}.
PriceVector stationary_prices(const ModelParams& params);

/// Prices where each demand term equals its supply term, (d_i/s_i)^{1/(a_i+b_i)}.
PriceVector classical_market_prices(const ModelParams& params);

/// Minimum value V0 = V(p0).
double potential_minimum(const ModelParams& params);

/// Quadratic coefficients gamma_i of the potential in log-price fluctuations
/// y about p0:  V = V0 + (m/2) sum_i gamma_i y_i^2 + O(y^3).
Vector gamma_coefficients(const ModelParams& params);

/// Log-price offsets xbar_i = ln(p0_i / p_scale).
Vector log_price_offsets(const ModelParams& params);

/// Utility dual to the model demand. Requires a common demand exponent a:
/// U(q) = (m^{1-a}/2) (sum_i d_i^{1/(a+1)} q_i^{a/(a+1)})^{a+1}.
double model_utility(const ModelParams& params, const QuantityVector& q);

/// Extension point for separable or non-separable potentials built from an
/// arbitrary demand and supply pair. The stationary-point survey in the
/// duality module works against this interface.
class PotentialModel {
public:
    virtual ~PotentialModel() = default;
    virtual std::size_t size() const = 0;
    virtual double demand(const PriceVector& p) const = 0;
    virtual double supply(const PriceVector& p) const = 0;
    double potential(const PriceVector& p) const { return demand(p) + supply(p); }
};

/// The power-law model behind the PotentialModel interface.
class PowerLawPotential final : public PotentialModel {
public:
    explicit PowerLawPotential(ModelParams params);
    std::size_t size() const override { return params_.n_commodities; }
    double demand(const PriceVector& p) const override;
    double supply(const PriceVector& p) const override;
    const ModelParams& params() const noexcept { return params_; }

private:
    ModelParams params_;
};

}  // namespace statmicro
