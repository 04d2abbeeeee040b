#include "statmicro/model.hpp"

#include "statmicro/errors.hpp"

#include <cmath>
#include <sstream>

namespace statmicro {

namespace {

void require_positive_vector(const Vector& v, std::size_t n, const char* field, bool allow_zero = false) {
    if (static_cast<std::size_t>(v.size()) != n) {
        std::ostringstream os;
        os << "field '" << field << "' has " << v.size() << " entries, expected " << n;
        throw ValidationError(os.str(), field);
    }
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const bool ok = std::isfinite(v(i)) && (allow_zero ? v(i) >= 0.0 : v(i) > 0.0);
        if (!ok) {
            std::ostringstream os;
            os << "field '" << field << "' entry " << (i + 1) << " must be "
               << (allow_zero ? ">= 0" : "> 0") << " (got " << v(i) << ")";
            throw ValidationError(os.str(), field);
        }
    }
}

void check_prices(const ModelParams& params, const PriceVector& p) {
    if (p.size() != params.n_commodities) {
        throw DomainError("price vector size does not match the number of commodities");
    }
}

}  // namespace

template <class Tag>
PositiveVector<Tag>::PositiveVector(Vector values) : values_(std::move(values)) {
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
        if (!(values_(i) > 0.0) || !std::isfinite(values_(i))) {
            std::ostringstream os;
            os << "entry " << i << " must be strictly positive and finite (got " << values_(i) << ")";
            throw DomainError(os.str());
        }
    }
}

template <class Tag>
PositiveVector<Tag>::PositiveVector(std::initializer_list<double> values)
    : PositiveVector(Eigen::Map<const Vector>(values.begin(), static_cast<Eigen::Index>(values.size()))) {}

template class PositiveVector<PriceTag>;
template class PositiveVector<QuantityTag>;

void ModelParams::validate() const {
    if (n_commodities == 0) {
        throw ValidationError("field 'n_commodities' must be a positive integer", "n_commodities");
    }
    const std::size_t n = n_commodities;
    require_positive_vector(a, n, "a");
    require_positive_vector(b, n, "b");
    require_positive_vector(d, n, "d");
    require_positive_vector(s, n, "s");
    if (!(m > 0.0) || !std::isfinite(m)) {
        throw ValidationError("field 'm' must be > 0", "m");
    }
    if (!(p_scale > 0.0) || !std::isfinite(p_scale)) {
        throw ValidationError("field 'p_scale' must be > 0", "p_scale");
    }
    require_positive_vector(kinetic_accel, n, "kinetic_accel");
    require_positive_vector(kinetic_vel, n, "kinetic_vel", /*allow_zero=*/true);
    const auto ni = static_cast<Eigen::Index>(n);
    if (rotation.rows() != ni || rotation.cols() != ni) {
        throw ValidationError("field 'rotation' must be an N x N matrix", "rotation");
    }
    const double defect = (rotation * rotation.transpose() - Matrix::Identity(ni, ni)).cwiseAbs().maxCoeff();
    if (!(defect <= 1e-12)) {
        std::ostringstream os;
        os << "field 'rotation' is not orthogonal (max |R R^T - I| = " << defect << ")";
        throw ValidationError(os.str(), "rotation");
    }
}

bool ModelParams::uniform_demand_exponent() const {
    return a.size() > 0 && (a.array() == a(0)).all();
}

ModelParams ModelParams::uniform(std::size_t n, double a, double b, double d, double s, double m,
                                 double kappa, double mu) {
    const auto ni = static_cast<Eigen::Index>(n);
    ModelParams params;
    params.n_commodities = n;
    params.a = Vector::Constant(ni, a);
    params.b = Vector::Constant(ni, b);
    params.d = Vector::Constant(ni, d);
    params.s = Vector::Constant(ni, s);
    params.m = m;
    params.kinetic_accel = Vector::Constant(ni, kappa);
    params.kinetic_vel = Vector::Constant(ni, mu);
    params.rotation = Matrix::Identity(ni, ni);
    return params;
}

double demand(const ModelParams& params, const PriceVector& p) {
    check_prices(params, p);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        sum += params.d(k) * std::pow(p[i], -params.a(k));
    }
    return 0.5 * params.m * sum;
}

double supply(const ModelParams& params, const PriceVector& p) {
    check_prices(params, p);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        sum += params.s(k) * std::pow(p[i], params.b(k));
    }
    return 0.5 * params.m * sum;
}

double potential(const ModelParams& params, const PriceVector& p) {
    return demand(params, p) + supply(params, p);
}

PriceVector stationary_prices(const ModelParams& params) {
    const Vector& a = params.a;
    const Vector& b = params.b;
    Vector p0 = ((a.array() * params.d.array()) / (b.array() * params.s.array()))
                    .pow((a + b).array().inverse());
    return PriceVector(std::move(p0));
}

PriceVector classical_market_prices(const ModelParams& params) {
    Vector p = (params.d.array() / params.s.array()).pow((params.a + params.b).array().inverse());
    return PriceVector(std::move(p));
}

double potential_minimum(const ModelParams& params) {
    return potential(params, stationary_prices(params));
}

Vector gamma_coefficients(const ModelParams& params) {
    const Vector p0 = stationary_prices(params).values();
    const auto& a = params.a.array();
    const auto& b = params.b.array();
    return 0.5 * (a.square() * params.d.array() * p0.array().pow(-a) +
                  b.square() * params.s.array() * p0.array().pow(b))
                     .matrix();
}

Vector log_price_offsets(const ModelParams& params) {
    return (stationary_prices(params).values().array() / params.p_scale).log().matrix();
}

double model_utility(const ModelParams& params, const QuantityVector& q) {
    if (!params.uniform_demand_exponent()) {
        throw UnsupportedConfiguration("model utility requires a common demand exponent a_i = a");
    }
    if (q.size() != params.n_commodities) {
        throw DomainError("quantity vector size does not match the number of commodities");
    }
    const double a = params.a(0);
    const double inner = (params.d.array().pow(1.0 / (a + 1.0)) * q.values().array().pow(a / (a + 1.0))).sum();
    return 0.5 * std::pow(params.m, 1.0 - a) * std::pow(inner, a + 1.0);
}

PowerLawPotential::PowerLawPotential(ModelParams params) : params_(std::move(params)) {
    params_.validate();
}

double PowerLawPotential::demand(const PriceVector& p) const { return statmicro::demand(params_, p); }

double PowerLawPotential::supply(const PriceVector& p) const { return statmicro::supply(params_, p); }

}  // namespace statmicro
