#include "statmicro/sampler.hpp"

#include "statmicro/errors.hpp"
#include "statmicro/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace statmicro {

namespace {

constexpr std::size_t kJackknifeBlocks = 50;
constexpr std::size_t kTuneBatch = 10;
constexpr double kShiftStep = 2.0;

std::uint64_t splitmix64(std::uint64_t state) {
    std::uint64_t z = state + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Local action differences for single-site moves. Keeps the channel
// coordinates a = R y alongside y.
class SiteUpdater {
public:
    SiteUpdater(const ModelParams& params, const Lattice& lattice, ActionMode mode)
        : params_(params), mode_(mode), T_(static_cast<Eigen::Index>(lattice.n_steps)), dt_(lattice.dt),
          periodic_(lattice.boundary == Boundary::periodic), half_m_dt_(0.5 * params.m * lattice.dt) {
        const Vector p0 = stationary_prices(params).values();
        demand_w_ = (params.d.array() * p0.array().pow(-params.a.array())).matrix();
        supply_w_ = (params.s.array() * p0.array().pow(params.b.array())).matrix();
        gamma_ = gamma_coefficients(params);
        const auto N = static_cast<Eigen::Index>(params.n_commodities);
        width_.resize(N);
        const double dt2 = dt_ * dt_;
        for (Eigen::Index i = 0; i < N; ++i) {
            double stiff = gamma_(i);
            for (Eigen::Index j = 0; j < N; ++j) {
                const double r = params.rotation(j, i);
                stiff += r * r * (6.0 * params.kinetic_accel(j) / (dt2 * dt2) + 2.0 * params.kinetic_vel(j) / dt2);
            }
            width_(i) = 1.0 / std::sqrt(params.m * dt_ * stiff);
        }
    }

    void reset(const Matrix& y) { a_ = params_.rotation * y; }

    const Vector& local_width() const { return width_; }

    double delta(const Matrix& y, Eigen::Index i, Eigen::Index t, double d) const {
        double kinetic = 0.0;
        const double inv1 = 1.0 / dt_;
        const double inv2 = inv1 * inv1;
        for (Eigen::Index j = 0; j < a_.rows(); ++j) {
            const double shift = params_.rotation(j, i) * d;
            if (shift == 0.0) continue;
            const double am2 = at(j, t - 2);
            const double am1 = at(j, t - 1);
            const double a0 = at(j, t);
            const double ap1 = at(j, t + 1);
            const double ap2 = at(j, t + 2);

            double accel = 0.0;
            if (has_second(t - 1)) accel += change((a0 - 2.0 * am1 + am2) * inv2, inv2, shift);
            accel += change((ap1 - 2.0 * a0 + am1) * inv2, -2.0 * inv2, shift);
            if (has_second(t + 1)) accel += change((ap2 - 2.0 * ap1 + a0) * inv2, inv2, shift);

            const double vel = change((a0 - am1) * inv1, inv1, shift) + change((ap1 - a0) * inv1, -inv1, shift);
            kinetic += params_.kinetic_accel(j) * accel + params_.kinetic_vel(j) * vel;
        }

        const double y0 = y(i, t);
        const double y1 = y0 + d;
        double pot = 0.0;
        if (mode_ == ActionMode::full) {
            const double a = params_.a(i);
            const double b = params_.b(i);
            pot = demand_w_(i) * (std::exp(-a * y1) - std::exp(-a * y0)) +
                  supply_w_(i) * (std::exp(b * y1) - std::exp(b * y0));
        } else {
            pot = gamma_(i) * (y1 * y1 - y0 * y0);
        }
        return half_m_dt_ * (kinetic + pot);
    }

    /// Action change when the whole row y_i moves by d. The kinetic term is
    /// shift invariant on a periodic lattice, so only the potential changes.
    double shift_delta(const Matrix& y, Eigen::Index i, double d) const {
        double pot = 0.0;
        if (mode_ == ActionMode::full) {
            const double a = params_.a(i);
            const double b = params_.b(i);
            pot = demand_w_(i) * std::expm1(-a * d) * (-a * y.row(i).array()).exp().sum() +
                  supply_w_(i) * std::expm1(b * d) * (b * y.row(i).array()).exp().sum();
        } else {
            pot = gamma_(i) * (2.0 * d * y.row(i).sum() + static_cast<double>(T_) * d * d);
        }
        return half_m_dt_ * pot;
    }

    /// Gaussian-limit width of the zero mode of row i.
    double shift_width(Eigen::Index i) const {
        return 1.0 / std::sqrt(params_.m * dt_ * static_cast<double>(T_) * gamma_(i));
    }

    void apply_shift(Matrix& y, Eigen::Index i, double d) {
        y.row(i).array() += d;
        a_ += params_.rotation.col(i) * Eigen::RowVectorXd::Constant(T_, d);
    }

    void apply(Matrix& y, Eigen::Index i, Eigen::Index t, double d) {
        y(i, t) += d;
        a_.col(t) += params_.rotation.col(i) * d;
    }

private:
    // change of x^2 when x moves by c * shift
    static double change(double x, double c, double shift) { return c * shift * (2.0 * x + c * shift); }

    double at(Eigen::Index j, Eigen::Index s) const {
        if (periodic_) return a_(j, ((s % T_) + T_) % T_);
        return (s < 0 || s >= T_) ? 0.0 : a_(j, s);
    }

    bool has_second(Eigen::Index s) const { return periodic_ || (s >= 0 && s < T_); }

    const ModelParams& params_;
    ActionMode mode_;
    Eigen::Index T_;
    double dt_;
    bool periodic_;
    double half_m_dt_;
    Vector demand_w_;
    Vector supply_w_;
    Vector gamma_;
    Vector width_;
    Matrix a_;
};

std::size_t observable_count(std::size_t n, std::size_t max_lag) { return 2 * n + n * n * (max_lag + 1); }

void measure(const Matrix& y, bool periodic, std::size_t max_lag, double* out) {
    const auto N = y.rows();
    const auto T = y.cols();
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < N; ++i) out[k++] = y.row(i).mean();
    for (Eigen::Index i = 0; i < N; ++i) out[k++] = y.row(i).array().exp().mean();
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) {
            for (std::size_t lag = 0; lag <= max_lag; ++lag) {
                const auto L = static_cast<Eigen::Index>(lag);
                double sum = 0.0;
                if (periodic) {
                    sum = y.row(i).head(T - L).dot(y.row(j).tail(T - L));
                    if (L > 0) sum += y.row(i).tail(L).dot(y.row(j).head(L));
                    out[k++] = sum / static_cast<double>(T);
                } else {
                    sum = y.row(i).head(T - L).dot(y.row(j).tail(T - L));
                    out[k++] = sum / static_cast<double>(T - L);
                }
            }
        }
    }
}

// A_full - A_quadratic - dt T V0; the kinetic terms cancel
double action_gap(const ModelParams& params, const Lattice& lattice, const Matrix& y) {
    const Vector p0 = stationary_prices(params).values();
    const Vector gamma = gamma_coefficients(params);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const double a = params.a(i);
        const double b = params.b(i);
        const double dw = params.d(i) * std::pow(p0(i), -a);
        const double sw = params.s(i) * std::pow(p0(i), b);
        for (Eigen::Index t = 0; t < y.cols(); ++t) {
            const double v = y(i, t);
            sum += dw * std::expm1(-a * v) + sw * std::expm1(b * v) - gamma(i) * v * v;
        }
    }
    return 0.5 * params.m * lattice.dt * sum;
}

// With `gap` set, each measurement row gains a last column holding action_gap.
ChainRecord run_one_chain(const ModelParams& params, const Lattice& lattice, const SamplerConfig& cfg,
                          std::size_t chain, bool gap = false) {
    const auto N = static_cast<Eigen::Index>(params.n_commodities);
    const auto T = static_cast<Eigen::Index>(lattice.n_steps);
    SiteUpdater updater(params, lattice, cfg.mode);
    std::mt19937_64 rng(chain_seed(cfg.seed, chain));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    Matrix y = Matrix::Zero(N, T);
    Vector step = Vector::Constant(N, cfg.step_size);
    const std::size_t n_obs = observable_count(params.n_commodities, cfg.max_lag) + (gap ? 1 : 0);
    ChainRecord record;
    record.observables.resize(static_cast<Eigen::Index>(cfg.measurements_per_chain()),
                              static_cast<Eigen::Index>(n_obs));
    std::vector<double> row(n_obs);

    std::vector<std::size_t> batch_accept(params.n_commodities, 0);
    std::size_t production_accept = 0;
    std::size_t production_moves = 0;
    std::size_t measured = 0;
    const bool periodic = lattice.boundary == Boundary::periodic;

    for (std::size_t sweep = 0; sweep < cfg.n_sweeps; ++sweep) {
        updater.reset(y);
        const Vector scale = (step.array() * updater.local_width().array()).matrix();
        const bool burning = sweep < cfg.n_burnin;
        for (Eigen::Index t = 0; t < T; ++t) {
            for (Eigen::Index i = 0; i < N; ++i) {
                const double d = scale(i) * normal(rng);
                const double u = uniform(rng);
                const double dA = updater.delta(y, i, t, d);
                if (dA <= 0.0 || u < std::exp(-dA)) {
                    updater.apply(y, i, t, d);
                    if (burning) {
                        ++batch_accept[static_cast<std::size_t>(i)];
                    } else {
                        ++production_accept;
                    }
                }
                if (!burning) ++production_moves;
            }
        }
        // collective shifts keep the slow zero mode moving; not counted in the acceptance
        if (periodic) {
            for (Eigen::Index i = 0; i < N; ++i) {
                const double d = kShiftStep * updater.shift_width(i) * normal(rng);
                const double u = uniform(rng);
                const double dA = updater.shift_delta(y, i, d);
                if (dA <= 0.0 || u < std::exp(-dA)) updater.apply_shift(y, i, d);
            }
        }
        if (burning && cfg.tune && (sweep + 1) % kTuneBatch == 0) {
            for (Eigen::Index i = 0; i < N; ++i) {
                auto& count = batch_accept[static_cast<std::size_t>(i)];
                const double rate = static_cast<double>(count) / static_cast<double>(kTuneBatch * T);
                step(i) *= std::exp(rate - 0.5);
                count = 0;
            }
        }
        if (!burning && (sweep + 1 - cfg.n_burnin) % cfg.n_thin == 0 &&
            measured < static_cast<std::size_t>(record.observables.rows())) {
            measure(y, periodic, cfg.max_lag, row.data());
            if (gap) row.back() = action_gap(params, lattice, y);
            record.observables.row(static_cast<Eigen::Index>(measured++)) =
                Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(n_obs));
        }
    }

    record.acceptance_rate = static_cast<double>(production_accept) / static_cast<double>(production_moves);
    record.step_size = step;
    record.final_path = PricePath(std::move(y));
    if (record.acceptance_rate < 0.1 || record.acceptance_rate > 0.9) {
        std::ostringstream os;
        os << "chain " << chain << ": acceptance " << record.acceptance_rate << " outside [0.1, 0.9] with step size "
           << step.maxCoeff();
        throw TuningError(os.str(), record.acceptance_rate, step.maxCoeff());
    }
    return record;
}

Matrix stack_observables(const std::vector<ChainRecord>& records) {
    Eigen::Index rows = 0;
    for (const auto& r : records) rows += r.observables.rows();
    const Eigen::Index cols = records.empty() ? 0 : records.front().observables.cols();
    Matrix all(rows, cols);
    Eigen::Index at = 0;
    for (const auto& r : records) {
        all.middleRows(at, r.observables.rows()) = r.observables;
        at += r.observables.rows();
    }
    return all;
}

// Leave-one-block-out means: row b is the mean of all rows outside block b.
Matrix leave_out_means(const Matrix& data, std::size_t blocks) {
    const auto n = static_cast<std::size_t>(data.rows());
    const Eigen::RowVectorXd total = data.colwise().sum();
    Matrix out(static_cast<Eigen::Index>(blocks), data.cols());
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t begin = n * b / blocks;
        const std::size_t end = n * (b + 1) / blocks;
        const Eigen::RowVectorXd part =
            data.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)).colwise().sum();
        out.row(static_cast<Eigen::Index>(b)) = (total - part) / static_cast<double>(n - (end - begin));
    }
    return out;
}

// value of f at the full mean and the jackknife error over leave-out means
std::pair<Vector, Vector> jackknife(const Matrix& data, std::size_t blocks,
                                    const std::function<Vector(const Eigen::RowVectorXd&)>& f) {
    const Vector value = f(data.colwise().mean());
    const Matrix loo = leave_out_means(data, blocks);
    Matrix thetas(static_cast<Eigen::Index>(blocks), value.size());
    for (Eigen::Index b = 0; b < loo.rows(); ++b) thetas.row(b) = f(loo.row(b)).transpose();
    const Eigen::RowVectorXd centre = thetas.colwise().mean();
    const double factor = static_cast<double>(blocks - 1) / static_cast<double>(blocks);
    const Vector err = ((thetas.rowwise() - centre).array().square().colwise().sum() * factor).sqrt().transpose();
    return {value, err};
}

std::size_t block_count(std::size_t n) {
    if (n < 2) throw LengthError("need at least two measurements for jackknife errors");
    return std::min(kJackknifeBlocks, n);
}

}  // namespace

ActionMode parse_action_mode(const std::string& name) {
    if (name == "full") return ActionMode::full;
    if (name == "quadratic") return ActionMode::quadratic;
    throw ValidationError("unknown action mode '" + name + "' (expected full or quadratic)", "mode");
}

std::string to_string(ActionMode mode) { return mode == ActionMode::full ? "full" : "quadratic"; }

void SamplerConfig::validate() const {
    if (n_sweeps == 0) throw ValidationError("n_sweeps must be positive", "n_sweeps");
    if (n_burnin >= n_sweeps) throw ValidationError("n_burnin must be smaller than n_sweeps", "n_burnin");
    if (n_thin == 0) throw ValidationError("n_thin must be positive", "n_thin");
    if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ValidationError("step_size must be > 0", "step_size");
    if (n_chains == 0) throw ValidationError("n_chains must be positive", "n_chains");
    if (measurements_per_chain() == 0) throw ValidationError("n_thin leaves no measurements", "n_thin");
}

std::uint64_t chain_seed(std::uint64_t master, std::size_t chain) {
    return splitmix64(master + (static_cast<std::uint64_t>(chain) + 1) * 0x9E3779B97F4A7C15ULL);
}

double local_action_change(const ModelParams& params, const Lattice& lattice, const PricePath& path, std::size_t i,
                           std::size_t t, double delta, ActionMode mode) {
    params.validate();
    lattice.validate();
    if (i >= path.n_commodities() || t >= path.n_steps() || path.n_steps() != lattice.n_steps ||
        path.n_commodities() != params.n_commodities) {
        throw RangeError("site outside the path");
    }
    SiteUpdater updater(params, lattice, mode);
    updater.reset(path.y());
    return updater.delta(path.y(), static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t), delta);
}

std::vector<ChainRecord> run_chains(const ModelParams& params, const Lattice& lattice, const SamplerConfig& cfg) {
    params.validate();
    lattice.validate();
    cfg.validate();
    if (cfg.max_lag >= lattice.n_steps) throw ValidationError("max_lag must be below n_steps", "max_lag");
    std::vector<ChainRecord> records(cfg.n_chains);
    parallel_for(cfg.n_chains, [&](std::size_t c) { records[c] = run_one_chain(params, lattice, cfg, c); });
    return records;
}

double integrated_autocorrelation_time(const std::vector<double>& series, double window_factor) {
    const std::size_t n = series.size();
    if (n < 2) return 0.5;
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
    double c0 = 0.0;
    for (double v : series) c0 += (v - mean) * (v - mean);
    c0 /= static_cast<double>(n);
    if (!(c0 > 0.0)) return 0.5;
    double tau = 0.5;
    for (std::size_t w = 1; w < n / 2; ++w) {
        double cw = 0.0;
        for (std::size_t k = 0; k + w < n; ++k) cw += (series[k] - mean) * (series[k + w] - mean);
        tau += cw / (static_cast<double>(n) * c0);
        if (static_cast<double>(w) >= window_factor * tau) break;
    }
    return std::max(tau, 0.5);
}

CorrelatorEstimate summarize(const ModelParams& params, const Lattice& lattice, const SamplerConfig& cfg,
                             const std::vector<ChainRecord>& records) {
    const std::size_t N = params.n_commodities;
    const std::size_t L = cfg.max_lag + 1;
    const Matrix data = stack_observables(records);
    const std::size_t blocks = block_count(static_cast<std::size_t>(data.rows()));
    const Vector p0 = stationary_prices(params).values();
    const auto n = static_cast<Eigen::Index>(N);

    const auto estimates = [&](const Eigen::RowVectorXd& mean) {
        Vector out(static_cast<Eigen::Index>(2 * N + N * N * L));
        out.head(n) = mean.head(n).transpose();
        out.segment(n, n) = (p0.array() * mean.segment(n, n).transpose().array()).matrix();
        std::size_t k = 2 * N;
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = 0; j < N; ++j) {
                for (std::size_t lag = 0; lag < L; ++lag, ++k) {
                    out(static_cast<Eigen::Index>(k)) = mean(static_cast<Eigen::Index>(k)) -
                                                        mean(static_cast<Eigen::Index>(i)) * mean(static_cast<Eigen::Index>(j));
                }
            }
        }
        return out;
    };
    const auto [value, err] = jackknife(data, blocks, estimates);

    CorrelatorEstimate est;
    est.mean_logprice = value.head(n);
    est.mean_logprice_err = err.head(n);
    est.mean_price = value.segment(n, n);
    est.mean_price_err = err.segment(n, n);
    const auto lags = lattice_lags(lattice, L);
    est.corr = PropagatorTable(N, lags, PropagatorMethod::lattice_fourier);
    est.corr_err = PropagatorTable(N, lags, PropagatorMethod::lattice_fourier);
    std::size_t k = 2 * N;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            for (std::size_t lag = 0; lag < L; ++lag, ++k) {
                est.corr.at(i, j, lag) = value(static_cast<Eigen::Index>(k));
                est.corr_err.at(i, j, lag) = err(static_cast<Eigen::Index>(k));
            }
        }
    }

    double accept = 0.0;
    for (const auto& r : records) accept += r.acceptance_rate;
    est.acceptance_rate = accept / static_cast<double>(records.size());
    est.n_measurements = static_cast<std::size_t>(data.rows());
    est.n_blocks = blocks;

    const auto ess_of = [&](std::size_t column) {
        double total = 0.0;
        for (const auto& r : records) {
            const auto col = r.observables.col(static_cast<Eigen::Index>(column));
            const std::vector<double> series(col.data(), col.data() + col.size());
            total += static_cast<double>(series.size()) / (2.0 * integrated_autocorrelation_time(series));
        }
        return total;
    };
    for (std::size_t i = 0; i < N; ++i) {
        const std::string idx = std::to_string(i + 1);
        est.ess.emplace_back("mean_logprice_" + idx, ess_of(i));
        est.ess.emplace_back("mean_price_" + idx, ess_of(N + i));
        est.ess.emplace_back("G_" + idx + idx + "_0", ess_of(2 * N + (i * N + i) * L));
    }
    return est;
}

CorrelatorEstimate run_chain(const ModelParams& params, const Lattice& lattice, const SamplerConfig& cfg) {
    return summarize(params, lattice, cfg, run_chains(params, lattice, cfg));
}

std::vector<BudgetVariance> variance_vs_budget(const ModelParams& params, const std::vector<double>& m_list,
                                               const Lattice& lattice, const SamplerConfig& cfg) {
    if (m_list.size() < 2) throw ValidationError("variance_vs_budget needs at least two budgets", "m_list");
    for (double m : m_list) {
        if (!(m >= 10.0)) throw ValidationError("every budget in m_list must be >= 10", "m_list");
    }
    std::vector<BudgetVariance> out;
    for (double m : m_list) {
        ModelParams p = params;
        p.m = m;
        const auto est = run_chain(p, lattice, cfg);
        BudgetVariance point;
        point.m = m;
        const auto N = static_cast<Eigen::Index>(params.n_commodities);
        point.variance.resize(N);
        point.error.resize(N);
        for (Eigen::Index i = 0; i < N; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            point.variance(i) = est.corr.at(ii, ii, 0);
            point.error(i) = est.corr_err.at(ii, ii, 0);
        }
        out.push_back(std::move(point));
    }
    return out;
}

double log_log_slope(const std::vector<BudgetVariance>& points, std::size_t i) {
    if (points.size() < 2) throw LengthError("slope needs at least two points");
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& p : points) {
        const double x = std::log(p.m);
        const double y = std::log(p.variance(static_cast<Eigen::Index>(i)));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(points.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

AnharmonicityResult anharmonicity_probe(const ModelParams& params, const Lattice& lattice, const SamplerConfig& cfg,
                                        double m, bool control) {
    ModelParams p = params;
    p.m = m;
    p.validate();
    lattice.validate();
    SamplerConfig quad_cfg = cfg;
    quad_cfg.tune = false;
    quad_cfg.mode = ActionMode::quadratic;
    quad_cfg.validate();
    if (quad_cfg.max_lag >= lattice.n_steps) throw ValidationError("max_lag must be below n_steps", "max_lag");
    SamplerConfig full_cfg = quad_cfg;
    full_cfg.mode = control ? ActionMode::quadratic : ActionMode::full;

    std::vector<ChainRecord> quad_records(cfg.n_chains);
    parallel_for(cfg.n_chains, [&](std::size_t c) { quad_records[c] = run_one_chain(p, lattice, quad_cfg, c, true); });
    for (const auto& r : quad_records) {
        if (r.acceptance_rate < 0.1 || r.acceptance_rate > 0.9) {
            throw TuningError("acceptance outside [0.1, 0.9] with the frozen step size", r.acceptance_rate,
                              quad_cfg.step_size);
        }
    }
    const Matrix quad = stack_observables(quad_records);
    const Matrix full = stack_observables(run_chains(p, lattice, full_cfg));

    const std::size_t N = p.n_commodities;
    const auto n = static_cast<Eigen::Index>(N);
    const std::size_t L = cfg.max_lag + 1;
    const auto c0_col = [&](std::size_t i) { return static_cast<Eigen::Index>(2 * N + (i * N + i) * L); };

    // importance weights of the full action relative to the truncated one
    const Vector gap = quad.col(quad.cols() - 1);
    const Vector w = control ? Vector(Vector::Ones(gap.size()))
                             : Vector((-(gap.array() - gap.mean())).exp().matrix());

    // columns: ybar_q, C0_q, ybar_f, C0_f (sampled full chain), w, w ybar_q, w C0_q
    Matrix data(quad.rows(), 6 * n + 1);
    for (std::size_t i = 0; i < N; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        data.col(ii) = quad.col(ii);
        data.col(n + ii) = quad.col(c0_col(i));
        data.col(2 * n + ii) = full.col(ii);
        data.col(3 * n + ii) = full.col(c0_col(i));
        data.col(6 * n - 2 * n + ii) = w.cwiseProduct(quad.col(ii));
        data.col(6 * n - n + ii) = w.cwiseProduct(quad.col(c0_col(i)));
    }
    data.col(6 * n) = w;

    const auto stats = [&](const Eigen::RowVectorXd& mean) {
        Vector out(4 * n);
        const double wsum = mean(6 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double gq = mean(n + i) - mean(i) * mean(i);
            const double wy = mean(4 * n + i) / wsum;
            const double gf = mean(5 * n + i) / wsum - wy * wy;
            const double gs = mean(3 * n + i) - mean(2 * n + i) * mean(2 * n + i);
            out(i) = gf;
            out(n + i) = gq;
            out(2 * n + i) = (gf - gq) / gq;
            out(3 * n + i) = (gs - gq) / gq;
        }
        return out;
    };
    const auto [value, err] = jackknife(data, block_count(static_cast<std::size_t>(data.rows())), stats);

    AnharmonicityResult result;
    result.m = m;
    result.g0_full = value.head(n);
    result.g0_quadratic = value.segment(n, n);
    result.relative_deviation = value.segment(2 * n, n);
    result.deviation_err = err.segment(2 * n, n);
    result.deviation = result.relative_deviation.cwiseAbs().maxCoeff();
    result.paired_relative_deviation = value.segment(3 * n, n);
    result.paired_deviation_err = err.segment(3 * n, n);
    return result;
}

nlohmann::json sampler_config_to_json(const SamplerConfig& cfg) {
    return {{"n_sweeps", cfg.n_sweeps}, {"n_burnin", cfg.n_burnin}, {"n_thin", cfg.n_thin},
            {"step_size", cfg.step_size}, {"seed", cfg.seed},         {"n_chains", cfg.n_chains},
            {"mode", to_string(cfg.mode)}, {"max_lag", cfg.max_lag},  {"tune", cfg.tune}};
}

nlohmann::json estimate_to_json(const CorrelatorEstimate& est) {
    const auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json ess = nlohmann::json::object();
    for (const auto& [name, value] : est.ess) ess[name] = value;
    return {{"mean_logprice", vec(est.mean_logprice)},
            {"mean_logprice_err", vec(est.mean_logprice_err)},
            {"mean_price", vec(est.mean_price)},
            {"mean_price_err", vec(est.mean_price_err)},
            {"corr", propagator_to_json(est.corr)},
            {"corr_err", propagator_to_json(est.corr_err)},
            {"acceptance_rate", est.acceptance_rate},
            {"ess", ess},
            {"n_measurements", est.n_measurements},
            {"n_blocks", est.n_blocks}};
}

void write_estimate_csv(std::ostream& out, const CorrelatorEstimate& est) {
    out << "tau,i,j,G,G_err\n" << std::setprecision(17);
    for (std::size_t i = 0; i < est.corr.n; ++i) {
        for (std::size_t j = 0; j < est.corr.n; ++j) {
            for (std::size_t k = 0; k < est.corr.lags.size(); ++k) {
                out << est.corr.lags[k] << "," << (i + 1) << "," << (j + 1) << "," << est.corr.at(i, j, k) << ","
                    << est.corr_err.at(i, j, k) << "\n";
            }
        }
    }
}

}  // namespace statmicro
