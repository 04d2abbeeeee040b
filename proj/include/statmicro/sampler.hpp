#pragma once

#include "statmicro/lattice.hpp"
#include "statmicro/model.hpp"
#include "statmicro/propagator.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace statmicro {

enum class ActionMode {
    full,       ///< exact exponential potential
    quadratic,  ///< Gaussian truncation
};

ActionMode parse_action_mode(const std::string& name);
std::string to_string(ActionMode mode);

/// Metropolis settings. `n_sweeps` counts every sweep including the
/// `n_burnin` tuning sweeps; one measurement is taken every `n_thin` sweeps
/// afterwards. `step_size` is the proposal width in units of the local
/// conditional standard deviation of the Gaussian action at each site, so
/// the same value suits every m and dt (2.0 gives about 50% acceptance in
/// the Gaussian limit).
struct SamplerConfig {
    std::size_t n_sweeps = 20000;
    std::size_t n_burnin = 2000;
    std::size_t n_thin = 1;
    double step_size = 2.0;
    std::uint64_t seed = 1;
    std::size_t n_chains = 1;
    ActionMode mode = ActionMode::full;
    std::size_t max_lag = 10;  ///< correlators are estimated for lags 0..max_lag slices
    bool tune = true;          ///< adapt step_size toward 50% acceptance during burn-in

    void validate() const;
    std::size_t measurements_per_chain() const { return (n_sweeps - n_burnin) / n_thin; }
};

/// Seed of chain `chain`: the splitmix64 output for state
/// master + (chain + 1) * 0x9E3779B97F4A7C15.
std::uint64_t chain_seed(std::uint64_t master, std::size_t chain);

/// Raw output of one chain. Each row of `observables` is one measurement:
/// the time averages of y_i (N entries), of exp(y_i) (N entries) and of
/// y_i(t) y_j(t + tau) for i, j and tau = 0..max_lag (N*N*(max_lag+1)
/// entries, i major, j next, tau minor).
struct ChainRecord {
    Matrix observables;
    double acceptance_rate = 0.0;
    Vector step_size;  ///< per-commodity step after tuning, in local-width units
    PricePath final_path;
};

struct CorrelatorEstimate {
    Vector mean_logprice;
    Vector mean_logprice_err;
    Vector mean_price;  ///< p0_i times the time average of exp(y_i)
    Vector mean_price_err;
    PropagatorTable corr;      ///< connected G_ij(tau), lags 0..max_lag dt
    PropagatorTable corr_err;  ///< jackknife errors on the same grid
    double acceptance_rate = 0.0;
    std::vector<std::pair<std::string, double>> ess;
    std::size_t n_measurements = 0;
    std::size_t n_blocks = 0;
};

/// Exact change of the action when y_i(t) moves by delta.
double local_action_change(const ModelParams& params, const Lattice& lattice, const PricePath& path,
                           std::size_t i, std::size_t t, double delta, ActionMode mode);

/// Runs cfg.n_chains independent chains (in parallel, up to worker_count())
/// starting from y = 0. Throws TuningError when the post-burn-in acceptance
/// of a chain lies outside [0.1, 0.9].
std::vector<ChainRecord> run_chains(const ModelParams& params, const Lattice& lattice, const SamplerConfig& cfg);

/// Jackknife estimates over 50 contiguous blocks of the concatenated chain
/// records (fewer when there are fewer measurements).
CorrelatorEstimate summarize(const ModelParams& params, const Lattice& lattice, const SamplerConfig& cfg,
                             const std::vector<ChainRecord>& records);

CorrelatorEstimate run_chain(const ModelParams& params, const Lattice& lattice, const SamplerConfig& cfg);

/// Integrated autocorrelation time with Sokal's automatic window (c = 5).
double integrated_autocorrelation_time(const std::vector<double>& series, double window_factor = 5.0);

struct BudgetVariance {
    double m = 0.0;
    Vector variance;  ///< connected G_ii(0) per commodity
    Vector error;
};

/// Equal-time variance for each budget in m_list (at least two values, each
/// >= 10), keeping every other parameter of `params` fixed.
std::vector<BudgetVariance> variance_vs_budget(const ModelParams& params, const std::vector<double>& m_list,
                                               const Lattice& lattice, const SamplerConfig& cfg);

/// Least-squares slope of ln Var[y_i] against ln m for commodity i.
double log_log_slope(const std::vector<BudgetVariance>& points, std::size_t i = 0);

struct AnharmonicityResult {
    double m = 0.0;
    Vector g0_full;             ///< full-action G_ii(0), reweighted from the truncated chain
    Vector g0_quadratic;
    Vector relative_deviation;  ///< (full - quadratic) / quadratic per commodity
    Vector deviation_err;       ///< jackknife error
    double deviation = 0.0;     ///< max_i |relative_deviation_i|
    Vector paired_relative_deviation;  ///< same, with the full action sampled directly
    Vector paired_deviation_err;
};

/// Relative change of G_ii(0) between the full and the truncated action.
/// A truncated-action chain is reweighted by exp(-(A_full - A_quadratic)),
/// so both estimates come from the same configurations and most of the noise
/// cancels. A chain sampling the full action directly with the same seeds and
/// frozen step size (cfg.step_size, tuning off) gives the paired cross-check.
/// `control` replaces the full action by the truncated one, giving exactly 0.
AnharmonicityResult anharmonicity_probe(const ModelParams& params, const Lattice& lattice, const SamplerConfig& cfg,
                                        double m, bool control = false);

nlohmann::json sampler_config_to_json(const SamplerConfig& cfg);
nlohmann::json estimate_to_json(const CorrelatorEstimate& est);

// CSV: "tau,i,j,G,G_err", ordered as the propagator CSV.
void write_estimate_csv(std::ostream& out, const CorrelatorEstimate& est);

}  // namespace statmicro
