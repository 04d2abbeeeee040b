#pragma once

#include "statmicro/duality.hpp"
#include "statmicro/model.hpp"
#include "statmicro/propagator.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace statmicro {

/// Observed prices on a uniform time grid.
struct PriceSeries {
    std::vector<double> timestamps;  ///< seconds (ISO-8601 input) or raw numbers
    Matrix prices;                   ///< N x T_obs, all > 0
    std::vector<std::string> labels;

    std::size_t n_commodities() const { return static_cast<std::size_t>(prices.rows()); }
    std::size_t n_observations() const { return static_cast<std::size_t>(prices.cols()); }
    double spacing() const;

    /// Checks positivity, label count and uniform spacing (1e-9 relative).
    void validate() const;
};

/// Parses "timestamp,label1,...,labelN" CSV; leading "#" lines are skipped. Timestamps are plain numbers or
/// ISO-8601 ("2024-01-31", "2024-01-31T09:30:00", optional fraction and
/// "Z" or "+hh:mm" offset). Throws SchemaError with row and column.
PriceSeries read_price_csv(std::istream& in);
PriceSeries load_price_csv(const std::filesystem::path& path);

/// Writes numeric timestamps with full precision.
void write_price_csv(std::ostream& out, const PriceSeries& series);

/// Series with timestamps k * dt and prices p0_i exp(y_i(t)) from a lattice path.
PriceSeries series_from_path(const ModelParams& params, const Matrix& y, double dt,
                             std::vector<std::string> labels = {});

struct Autocovariance {
    PropagatorTable cov;  ///< C_ij(tau) at tau = k * spacing, k = 0..max_lag
    Matrix stderr_diag;   ///< N x (max_lag + 1) Bartlett standard errors of C_ii(tau)
    std::size_t n_obs = 0;
};

/// Demeaned log-price autocovariance with the biased 1/T normalisation.
/// Throws LengthError unless T_obs >= 10 * max_lag.
Autocovariance empirical_autocovariance(const PriceSeries& series, std::size_t max_lag);

/// First lag (in steps) where |C_ii| drops below 2 standard errors, at
/// least `min_lags`, capped by the table.
std::size_t default_fit_lags(const Autocovariance& acov, std::size_t i, std::size_t min_lags = 5);

struct FitOptions {
    std::size_t fit_lags = 0;  ///< lags 0..fit_lags used; 0 picks default_fit_lags
    double gradient_tol = 1e-10;
    int max_iterations = 500;
    Vector initial;  ///< optional (kappa, mu, gamma) used as the only start
};

struct ChannelFit {
    double kappa = 0.0;
    double mu = 0.0;
    double gamma = 0.0;
    double residual_norm = 0.0;  ///< |r| with residuals scaled by C(0)
    double gradient_norm = 0.0;
    std::size_t fit_lags = 0;
    std::vector<double> objective_trace;
    ResidueBranch branch = ResidueBranch::real_roots;
};

/// Least-squares fit of channel_propagator(kappa, mu, gamma, m; tau) to
/// chat(tau) for tau = lags[0..fit_lags], in log-parameters. Several starts
/// seeded from an exponential fit; the best converged one is kept.
/// Throws IdentifiabilityError when chat(0) is not positive or the
/// correlation does not decay, FitError when no start converges.
ChannelFit fit_channel(const std::vector<double>& lags, const std::vector<double>& chat, double m,
                       const FitOptions& options = {});

struct SupplyDemand {
    Vector d;
    Vector s;
};

/// Inverts p0_i^{a_i + b_i} = a_i d_i / (b_i s_i) and
/// gamma_i = (a_i^2 d_i p0_i^{-a_i} + b_i^2 s_i p0_i^{b_i}) / 2.
/// Throws InconsistentInputs for mismatched sizes or non-positive inputs.
SupplyDemand recover_supply_demand(const PriceVector& p0_hat, const Vector& gamma_hat, const Vector& a,
                                   const Vector& b);

/// Cost model from observed (p0, q0): beta_i = p0_i q0_i^{-1/b_i},
/// alpha_i = m s_i beta_i^{b_i}.
CostParams recover_cost(const PriceVector& p0, const QuantityVector& q0, const Vector& b, const Vector& s, double m);

struct CalibrationOptions {
    std::size_t max_lag = 0;  ///< 0 picks min(200, T_obs / 10)
    FitOptions fit;
    std::size_t n_bootstrap = 32;
    std::size_t block_length = 0;  ///< 0 picks 20 * fit_lags
    std::uint64_t seed = 1;
};

struct CalibrationResult {
    std::vector<std::string> labels;
    std::vector<ChannelFit> fits;
    Vector kappa;
    Vector mu;
    Vector gamma;
    Vector p0_hat;  ///< geometric mean of the prices
    Vector d_hat;
    Vector s_hat;
    double residual_norm = 0.0;
    std::vector<Matrix> covariance;  ///< per channel, 3 x 3 bootstrap covariance of (kappa, mu, gamma)
    Autocovariance autocov;
    double m = 0.0;
};

/// Full pipeline per channel (identity rotation): autocovariance, fit,
/// geometric-mean p0 and (d, s) from the given exponents.
CalibrationResult calibrate(const PriceSeries& series, double m, const Vector& a, const Vector& b,
                            const CalibrationOptions& options = {});

nlohmann::json calibration_to_json(const CalibrationResult& result);

/// "channel,tau,empirical,stderr,fitted" over the fitted lags.
void write_fit_overlay_csv(std::ostream& out, const CalibrationResult& result);

}  // namespace statmicro
